//! Subsampling of massive line-oriented datasets straight from disk.
//!
//! Two addressing schemes are provided:
//!
//! * **Random addressing (RAS)**: every record of a subsample is located by an
//!   independent random byte offset, realigned to the next line header.
//! * **Sequential addressing (SAS)**: one random byte offset picks a start
//!   line; the remaining records are read sequentially, wrapping at end of
//!   file. SAS needs a shuffled store, produced by [`shuffler::shuffle`] with
//!   bounded memory.
//!
//! On top of the samplers sit the combined estimators and their
//! automatic-inference squared standard errors ([`estimators`]), and a
//! simulation [`harness`] that replays the validation experiments and the
//! hard-drive sampling cost (HDSC) benchmark.
//!
//! ```no_run
//! use seqsample::line_store::ByteAddressedFile;
//! use seqsample::sampler::{draw_batch, SubsamplePlan, Mode};
//!
//! let mut file = ByteAddressedFile::open("shuffled.csv")?;
//! let plan = SubsamplePlan::new(1_000, 50, Mode::Sas, 7);
//! let batch = draw_batch(&mut file, &plan)?;
//! assert_eq!(batch.addressing_ops, 50);
//! # Ok::<(), seqsample::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod line_store;
pub mod rng;
pub mod sampler;
pub mod shuffler;

pub use error::{Error, Result};
