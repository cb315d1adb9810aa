//! Count-table ingestion, quality filters, resolutions and OTU screening.

mod fdr;
mod rank_test;
mod resolution;
mod screen;
mod table;

pub use fdr::benjamini_hochberg;
pub use rank_test::{mann_whitney_u, MwuResult, DEFAULT_EXACT_CUTOFF};
pub use resolution::{compute_resolutions, read_resolutions, write_resolutions, ResolutionVector};
pub use screen::{screen_otus, ScreenEntry, ScreeningResult};
pub use table::{filter_table, load_table, OtuTable, TableFormat};
