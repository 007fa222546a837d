use twophase::randvar::derive_stream;
use twophase::study::{generate_surrogate, surrogate_schema, write_table_csv};

use crate::error::CliResult;
use crate::manifest::{Manifest, OutputSet, ARTIFACT_VERSION, CONFIG_SCHEMA_VERSION};
use crate::SurrogateArgs;

pub fn run(args: &SurrogateArgs) -> CliResult<Manifest> {
    let table = generate_surrogate(&mut derive_stream(args.seed, 0), args.n)?;
    let mut bytes = Vec::new();
    write_table_csv(&table, &mut bytes, false)?;
    let mut out = OutputSet::create(&args.out)?;
    out.write("surrogate.csv", &bytes)?;
    out.write_json("surrogate_schema.json", &surrogate_schema())?;
    out.finish(Manifest {
        command: "surrogate".into(),
        version: ARTIFACT_VERSION.into(),
        config_schema: CONFIG_SCHEMA_VERSION,
        seed: Some(args.seed),
        args: serde_json::to_value(args)?,
        resolved_config: None,
        inputs: Vec::new(),
        outputs: Vec::new(),
    })
}
