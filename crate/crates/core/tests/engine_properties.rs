//! Randomised topologies (at most six processing items) checked for FIFO
//! channels, shuffle balance, key routing, loss only at spouts and
//! reproducible deterministic runs.

mod common;

use common::topologies::{check_fifo, check_loss, check_routing, execute, shape};
use proptest::prelude::*;
use sentistream::engine::{QueueCapacity, RunMode, RunOptions, SpoutOverflow};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deterministic_semantics(shape in shape()) {
        let (report, received) = execute(&shape, RunOptions::default());
        check_fifo(&received)?;
        check_routing(&shape, &received)?;
        check_loss(&shape, &report, &received)?;
        prop_assert_eq!(report.events_dropped_at_spout, 0);
    }

    #[test]
    fn concurrent_semantics_under_pressure(shape in shape(), cap in 1usize..4) {
        let options = RunOptions {
            mode: RunMode::Concurrent,
            queue_capacity: QueueCapacity::Bounded(cap),
            ..RunOptions::default()
        };
        let (report, received) = execute(&shape, options);
        check_fifo(&received)?;
        check_routing(&shape, &received)?;
        check_loss(&shape, &report, &received)?;
    }

    #[test]
    fn concurrent_blocking_spouts_lose_nothing(shape in shape()) {
        let options = RunOptions {
            mode: RunMode::Concurrent,
            queue_capacity: QueueCapacity::Bounded(1),
            spout_overflow: SpoutOverflow::Block,
            ..RunOptions::default()
        };
        let (report, received) = execute(&shape, options);
        check_loss(&shape, &report, &received)?;
        prop_assert_eq!(report.events_dropped_at_spout, 0);
    }

    #[test]
    fn deterministic_runs_reproduce(shape in shape()) {
        let options = RunOptions { record_log: true, ..RunOptions::default() };
        let (a, _) = execute(&shape, options);
        let (b, _) = execute(&shape, options);
        prop_assert!(a.same_outcome(&b));
    }
}
