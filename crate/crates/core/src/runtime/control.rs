use std::collections::VecDeque;
use std::str::FromStr;
use std::sync::mpsc;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlState {
    Running,
    Paused,
    SteppingItem,
    SteppingIteration,
    Terminating,
    Finished,
}

impl ControlState {
    pub fn name(self) -> &'static str {
        match self {
            ControlState::Running => "running",
            ControlState::Paused => "paused",
            ControlState::SteppingItem => "stepping-item",
            ControlState::SteppingIteration => "stepping-iteration",
            ControlState::Terminating => "terminating",
            ControlState::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pause,
    Resume,
    StepItem,
    StepIteration,
    Terminate,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pause" => Command::Pause,
            "resume" => Command::Resume,
            "step-item" => Command::StepItem,
            "step-iteration" => Command::StepIteration,
            "terminate" => Command::Terminate,
            other => return Err(format!("unknown command `{other}`")),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("the run must be paused first")]
    NotPaused,
    #[error("the run has finished")]
    Finished,
}

/// A 1-D or 2-D cut through a variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub variable: String,
    pub timelevel: usize,
    /// (dimension, index) pairs; the remaining 1 or 2 dimensions are free.
    pub fixed: Vec<(usize, usize)>,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slice {
    pub variable: String,
    pub iteration: u64,
    pub timelevel: usize,
    /// One entry per free dimension, outermost first.
    pub axes: Vec<SliceAxis>,
    /// Nested arrays, first free dimension outermost.
    pub values: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceAxis {
    pub dim: usize,
    pub coordinates: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SliceError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("bad slice: {0}")]
    BadIndex(String),
    #[error("variable `{0}` has no storage")]
    NoStorage(String),
    #[error("{0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Checkpoint {
    /// Before a scheduled routine call.
    Item,
    /// Before an evolution iteration starts.
    Iteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Decision {
    Go,
    /// A terminate command arrived; finish the iteration and stop.
    Terminate,
}

type SliceJob = (SliceSpec, mpsc::Sender<Result<Slice, SliceError>>);

#[derive(Debug)]
struct Inner {
    state: ControlState,
    step_budget: u32,
    terminate_pending: bool,
    waiting: bool,
    slices: VecDeque<SliceJob>,
}

/// Execution control shared between the run loop and outside clients.
/// The run loop consults it only at item and iteration boundaries.
#[derive(Debug)]
pub struct RunControl {
    inner: Mutex<Inner>,
    cv: Condvar,
}

impl Default for RunControl {
    fn default() -> Self {
        Self::new()
    }
}

impl RunControl {
    pub fn new() -> Self {
        RunControl {
            inner: Mutex::new(Inner {
                state: ControlState::Running,
                step_budget: 0,
                terminate_pending: false,
                waiting: false,
                slices: VecDeque::new(),
            }),
            cv: Condvar::new(),
        }
    }

    /// Starts the run paused at its first item.
    pub fn start_paused(&self) {
        self.inner.lock().unwrap().state = ControlState::Paused;
    }

    pub fn state(&self) -> ControlState {
        self.inner.lock().unwrap().state
    }

    /// True while the run loop is blocked at a pause point.
    pub fn waiting(&self) -> bool {
        self.inner.lock().unwrap().waiting
    }

    pub fn command(&self, cmd: Command) -> Result<ControlState, ControlError> {
        let mut s = self.inner.lock().unwrap();
        use ControlState::*;
        let next = match (cmd, s.state) {
            (_, Finished) => return Err(ControlError::Finished),
            (Command::Terminate, _) => {
                s.terminate_pending = true;
                Terminating
            }
            (_, Terminating) => Terminating,
            (Command::Pause, _) => {
                s.step_budget = 0;
                Paused
            }
            (Command::Resume, _) => Running,
            (Command::StepItem, Paused | SteppingItem) => {
                s.step_budget += 1;
                SteppingItem
            }
            (Command::StepIteration, Paused) => SteppingIteration,
            (Command::StepItem | Command::StepIteration, _) => return Err(ControlError::NotPaused),
        };
        s.state = next;
        if next != ControlState::Paused {
            // The loop is about to resume; never report a stale pause.
            s.waiting = false;
        }
        drop(s);
        self.cv.notify_all();
        Ok(next)
    }

    /// Queues a slice for the run loop and waits for the answer.
    pub fn request_slice(&self, spec: SliceSpec, timeout: Duration) -> Result<Slice, SliceError> {
        let (tx, rx) = mpsc::channel();
        {
            let mut s = self.inner.lock().unwrap();
            if s.state == ControlState::Finished {
                return Err(SliceError::Unavailable("the run has finished".into()));
            }
            s.slices.push_back((spec, tx));
        }
        self.cv.notify_all();
        rx.recv_timeout(timeout)
            .map_err(|_| SliceError::Unavailable("the run did not answer in time".into()))?
    }

    /// Called by the run loop at a boundary. Services queued slices and
    /// blocks while paused. `publish` is told whether the loop is waiting.
    pub(crate) fn checkpoint(
        &self,
        kind: Checkpoint,
        serve: &dyn Fn(&SliceSpec) -> Result<Slice, SliceError>,
        publish: &dyn Fn(ControlState, bool),
    ) -> Decision {
        let mut s = self.inner.lock().unwrap();
        loop {
            while let Some((spec, tx)) = s.slices.pop_front() {
                let _ = tx.send(serve(&spec));
            }
            if s.terminate_pending {
                s.terminate_pending = false;
                s.waiting = false;
                publish(s.state, false);
                return Decision::Terminate;
            }
            use ControlState::*;
            match (s.state, kind) {
                (Running | Terminating | Finished, _) | (SteppingItem, Checkpoint::Iteration) => {
                    break
                }
                (SteppingIteration, Checkpoint::Item) => break,
                (SteppingItem, Checkpoint::Item) => {
                    s.step_budget = s.step_budget.saturating_sub(1);
                    if s.step_budget == 0 {
                        s.state = Paused;
                    }
                    break;
                }
                (SteppingIteration, Checkpoint::Iteration) => s.state = Paused,
                (Paused, _) => {
                    if !s.waiting {
                        s.waiting = true;
                        publish(s.state, true);
                    }
                    s = self
                        .cv
                        .wait_timeout(s, Duration::from_millis(100))
                        .unwrap()
                        .0;
                }
            }
        }
        if s.waiting {
            s.waiting = false;
        }
        publish(s.state, false);
        Decision::Go
    }

    /// Marks the run finished and fails queued slice requests.
    pub(crate) fn finish(&self) {
        let mut s = self.inner.lock().unwrap();
        s.state = ControlState::Finished;
        s.waiting = false;
        for (_, tx) in s.slices.drain(..) {
            let _ = tx.send(Err(SliceError::Unavailable("the run has finished".into())));
        }
        drop(s);
        self.cv.notify_all();
    }
}
