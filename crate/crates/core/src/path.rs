//! Path recording for trajectory dumps.

use crate::population::PopulationState;

/// Receives population snapshots during a simulation.
pub trait PathSink {
    /// Called at the start, after every event and at every grid time.
    fn record(&mut self, state: &PopulationState, spine: Option<usize>);

    /// Spacing of the fixed output grid, if any.
    fn grid_step(&self) -> Option<f64> {
        None
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoPath;

impl PathSink for NoPath {
    #[inline]
    fn record(&mut self, _: &PopulationState, _: Option<usize>) {}
}

/// One colony at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub time: f64,
    pub label: String,
    pub trait_value: f64,
    /// `Some(true)` for the spine of a spinal trajectory, `None` for direct ones.
    pub spine: Option<bool>,
}

/// Collects rows at event times and on an optional fixed grid.
#[derive(Debug, Default, Clone)]
pub struct PathRecorder {
    grid: Option<f64>,
    rows: Vec<PathRow>,
}

impl PathRecorder {
    pub fn new(grid: Option<f64>) -> Self {
        Self {
            grid: grid.filter(|h| *h > 0.0 && h.is_finite()),
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[PathRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<PathRow> {
        self.rows
    }
}

impl PathSink for PathRecorder {
    fn record(&mut self, state: &PopulationState, spine: Option<usize>) {
        for (i, c) in state.colonies().iter().enumerate() {
            self.rows.push(PathRow {
                time: state.time(),
                label: c.label.to_string(),
                trait_value: c.trait_value,
                spine: spine.map(|s| s == i),
            });
        }
    }

    fn grid_step(&self) -> Option<f64> {
        self.grid
    }
}

/// Walks the output grid: yields the grid times in `(from, to]` not yet visited.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GridCursor {
    step: f64,
    next_index: u64,
}

impl GridCursor {
    pub(crate) fn new(step: Option<f64>, start: f64) -> Option<Self> {
        step.map(|step| Self {
            step,
            next_index: (start / step).floor() as u64 + 1,
        })
    }

    /// Next grid time if it is `<= limit`, advancing the cursor.
    pub(crate) fn next_before(&mut self, limit: f64) -> Option<f64> {
        let t = self.next_index as f64 * self.step;
        if t <= limit {
            self.next_index += 1;
            Some(t)
        } else {
            None
        }
    }
}
