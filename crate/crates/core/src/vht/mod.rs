//! Vertical Hoeffding tree: attribute statistics partitioned across
//! local-statistics instances, coordinated by a single model aggregator.

pub mod aggregator;
pub mod bolts;
pub mod driver;
pub mod events;
pub mod local;

pub use aggregator::{AggregatorCounters, ModelAggregator, SplitOutcome, VhtParams, DEFAULT_TIMEOUT_EVENTS};
pub use bolts::{AggregatorBolt, LocalStatisticsBolt};
pub use driver::VerticalTree;
pub use events::{AggregatorOutput, AttributeEvent, ComputeEvent, DropLeafEvent, LocalResultEvent};
pub use local::LocalStatistics;
