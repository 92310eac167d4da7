//! Benchmark harness: token throughput, speedup tables, concurrent load and
//! parity statistics.

pub mod load;
pub mod parity;
pub mod stats;
pub mod table;
pub mod tps;

pub use load::{load_sim, LoadError, LoadReport, StubProfile, Target};
pub use parity::{parity_stats, ParityError, ParityStats, RSquaredAbsent};
pub use stats::{mean, nearest_rank, population_std};
pub use tps::{measure_tps, speedup_table, ModelSpeed, MonotonicClock, SpeedupRow, TpsError, TpsResult, TpsRun, WallClock};
