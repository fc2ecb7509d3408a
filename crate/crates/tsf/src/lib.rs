//! File formats, CSV ingest and the command-line pipeline around
//! [`tsf_core`].

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod frame_csv;
pub mod fsutil;
pub mod ingest;
pub mod manifest;
pub mod reports;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use error::{Error, Result};
pub use frame_csv::{read_frame, write_frame};
pub use ingest::{parse_fundamentals_csv, parse_ohlcv_csv, IngestStats, OhlcvSchema};
