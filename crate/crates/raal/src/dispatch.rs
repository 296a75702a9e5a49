//! Parallel batch evaluation.

use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use raal_core::engine::{Dispatcher, Objective, Task};
use raal_core::Result;

/// One scoped thread per worker that has tasks. A worker runs its own tasks
/// in plan order and reports each result over a channel; results come back
/// in task order regardless of completion order.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThreadedDispatcher;

impl Dispatcher for ThreadedDispatcher {
    fn dispatch<O: Objective + ?Sized>(&mut self, objective: &O, tasks: &[Task]) -> Vec<Result<f64>> {
        let workers = tasks.iter().map(|t| t.worker + 1).max().unwrap_or(0);
        let mut queues: Vec<Vec<usize>> = vec![Vec::new(); workers];
        for (i, t) in tasks.iter().enumerate() {
            queues[t.worker].push(i);
        }
        let (tx, rx) = mpsc::channel();
        thread::scope(|scope| {
            for queue in queues.into_iter().filter(|q| !q.is_empty()) {
                let tx = tx.clone();
                scope.spawn(move || {
                    for i in queue {
                        let t = &tasks[i];
                        if tx.send((i, objective.evaluate(&t.point, t.level))).is_err() {
                            return;
                        }
                    }
                });
            }
        });
        drop(tx);
        let mut results: Vec<Option<Result<f64>>> = (0..tasks.len()).map(|_| None).collect();
        for (i, r) in rx {
            results[i] = Some(r);
        }
        results
            .into_iter()
            .map(|r| r.unwrap_or(Err(raal_core::Error::Precondition("worker exited without a result"))))
            .collect()
    }
}

/// Sleeps `per_unit × λ_m` before every evaluation at level `m`.
#[derive(Debug, Clone)]
pub struct Latency<O> {
    pub inner: O,
    pub per_unit: Duration,
}

impl<O: Objective> Objective for Latency<O> {
    fn bounds(&self) -> &[(f64, f64)] {
        self.inner.bounds()
    }

    fn costs(&self) -> &[f64] {
        self.inner.costs()
    }

    fn evaluate(&self, x: &[f64], level: usize) -> Result<f64> {
        if let Some(c) = self.inner.costs().get(level) {
            thread::sleep(self.per_unit.mul_f64(*c));
        }
        self.inner.evaluate(x, level)
    }

    fn optimum_value(&self) -> Option<f64> {
        self.inner.optimum_value()
    }

    fn is_feasible(&self, x: &[f64]) -> bool {
        self.inner.is_feasible(x)
    }
}
