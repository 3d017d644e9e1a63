use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Origin {
    pub thorn: String,
    pub routine: String,
}

impl Origin {
    pub fn new(thorn: &str, routine: &str) -> Self {
        Origin {
            thorn: thorn.to_string(),
            routine: routine.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarningEvent {
    /// 0 is the most severe.
    pub level: u32,
    pub origin: Origin,
    pub iteration: u64,
    pub message: String,
}

impl fmt::Display for WarningEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "WARNING level {} from {} at iteration {}: {}",
            self.level, self.origin.thorn, self.iteration, self.message
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarnAction {
    Continue,
    Fatal,
}

/// Shared, append-only warning log. Clones refer to the same log.
#[derive(Debug, Clone)]
pub struct WarningLog {
    events: Arc<Mutex<Vec<WarningEvent>>>,
    error_level: u32,
    echo: bool,
}

impl WarningLog {
    /// Warnings with level at or below `error_level` are fatal. With `echo`
    /// each event is also printed to standard output.
    pub fn new(error_level: u32, echo: bool) -> Self {
        WarningLog {
            events: Arc::default(),
            error_level,
            echo,
        }
    }

    pub fn error_level(&self) -> u32 {
        self.error_level
    }

    pub fn len(&self) -> usize {
        self.events.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Events from index `n` on.
    pub fn since(&self, n: usize) -> Vec<WarningEvent> {
        let events = self.events.lock().unwrap();
        events.get(n..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn all(&self) -> Vec<WarningEvent> {
        self.since(0)
    }

    /// Lines as they were echoed.
    pub fn lines(&self) -> Vec<String> {
        self.all().iter().map(ToString::to_string).collect()
    }
}

/// Records a warning and reports whether it must stop the run.
pub fn warn(
    log: &WarningLog,
    level: u32,
    origin: Origin,
    iteration: u64,
    message: impl Into<String>,
) -> WarnAction {
    let event = WarningEvent {
        level,
        origin,
        iteration,
        message: message.into(),
    };
    if log.echo {
        println!("{event}");
    }
    log.events.lock().unwrap().push(event);
    if level <= log.error_level {
        WarnAction::Fatal
    } else {
        WarnAction::Continue
    }
}
