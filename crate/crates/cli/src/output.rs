use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Human,
    Json,
}

/// Prints one result: a single JSON document in json mode, otherwise the
/// human rendering.
pub fn emit<T: Serialize>(format: Format, value: &T, human: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(value).expect("serialisable output")),
        Format::Human => println!("{}", human()),
    }
}
