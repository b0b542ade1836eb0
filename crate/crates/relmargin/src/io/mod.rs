//! Data in and out: CSV datasets, synthetic generators, model and chain
//! files, and result tables.

pub mod csvio;
pub mod generators;
pub mod model_file;
pub mod results;

pub use csvio::{load_csv, parse_csv_str, write_csv, CsvSchema};
pub use generators::{gen_drift, gen_gaussian_pair, DriftGenConfig, GaussPairConfig};
pub use model_file::{
    chain_from_str, load_chain, load_model, model_from_str, save_chain, save_model,
    FORMAT_VERSION,
};
pub use results::ResultTable;
