//! Sequential-task-flow executor.
//!
//! Tasks are submitted in program order with the named buffers they read and
//! write. Each new task gets an edge from every earlier task it conflicts
//! with (read-after-write, write-after-read, write-after-write), so the graph
//! is acyclic by construction and any topological schedule observes the same
//! buffer contents as running the tasks one by one in submission order.
//!
//! Dependencies are tracked per whole buffer. Buffers hold opaque shared
//! values (`Arc<dyn Any>`); a task can only touch buffers it declared.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::error::Error as StdError;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use thiserror::Error;

pub type BufferValue = Arc<dyn Any + Send + Sync>;
pub type TaskId = usize;
pub type TaskResult = Result<(), Box<dyn StdError + Send + Sync>>;
type Body = Box<dyn FnOnce(&mut TaskContext<'_>) -> TaskResult + Send>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("buffer {0:?} was never declared")]
    UnknownBuffer(String),
    #[error("buffer {0:?} declared twice")]
    DuplicateBuffer(String),
    #[error("task name {0:?} already used")]
    DuplicateTaskName(String),
    #[error("task {task:?} touched undeclared buffer {buffer:?}")]
    UndeclaredAccess { task: String, buffer: String },
    #[error("task {task:?} read buffer {buffer:?} before anything was written to it")]
    EmptyBuffer { task: String, buffer: String },
    #[error("buffer {buffer:?} does not hold the requested type (task {task:?})")]
    TypeMismatch { task: String, buffer: String },
    #[error("task {task:?} failed: {source}")]
    TaskFailed {
        task: String,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
    #[error("task {task:?} panicked: {message}")]
    TaskPanicked { task: String, message: String },
    #[error("worker count must be at least 1")]
    NoWorkers,
}

struct Task {
    name: String,
    reads: BTreeSet<String>,
    writes: BTreeSet<String>,
    body: Body,
}

type Store = Mutex<BTreeMap<String, Option<BufferValue>>>;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Buffer access handed to a running task body.
pub struct TaskContext<'a> {
    task: &'a str,
    reads: &'a BTreeSet<String>,
    writes: &'a BTreeSet<String>,
    store: &'a Store,
}

impl TaskContext<'_> {
    pub fn task_name(&self) -> &str {
        self.task
    }

    /// Reads a declared input (or a buffer this task also writes).
    pub fn read<T: Any + Send + Sync>(&self, buffer: &str) -> Result<Arc<T>, GraphError> {
        if !self.reads.contains(buffer) && !self.writes.contains(buffer) {
            return Err(GraphError::UndeclaredAccess {
                task: self.task.to_string(),
                buffer: buffer.to_string(),
            });
        }
        let value = lock(self.store)
            .get(buffer)
            .cloned()
            .flatten()
            .ok_or_else(|| GraphError::EmptyBuffer {
                task: self.task.to_string(),
                buffer: buffer.to_string(),
            })?;
        value.downcast::<T>().map_err(|_| GraphError::TypeMismatch {
            task: self.task.to_string(),
            buffer: buffer.to_string(),
        })
    }

    pub fn write<T: Any + Send + Sync>(
        &mut self,
        buffer: &str,
        value: T,
    ) -> Result<(), GraphError> {
        if !self.writes.contains(buffer) {
            return Err(GraphError::UndeclaredAccess {
                task: self.task.to_string(),
                buffer: buffer.to_string(),
            });
        }
        lock(self.store).insert(buffer.to_string(), Some(Arc::new(value)));
        Ok(())
    }
}

#[derive(Default)]
pub struct TaskGraph {
    buffers: BTreeMap<String, Option<BufferValue>>,
    tasks: Vec<Task>,
    edges: Vec<(TaskId, TaskId)>,
}

impl std::fmt::Debug for TaskGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskGraph")
            .field("buffers", &self.buffers.keys().collect::<Vec<_>>())
            .field("tasks", &self.task_names())
            .field("edges", &self.edges)
            .finish()
    }
}

impl TaskGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_buffer(&mut self, name: &str) -> Result<(), GraphError> {
        if self.buffers.contains_key(name) {
            return Err(GraphError::DuplicateBuffer(name.to_string()));
        }
        self.buffers.insert(name.to_string(), None);
        Ok(())
    }

    /// Declares a buffer that already holds `value` before any task runs.
    pub fn add_input<T: Any + Send + Sync>(
        &mut self,
        name: &str,
        value: T,
    ) -> Result<(), GraphError> {
        self.add_buffer(name)?;
        self.buffers.insert(name.to_string(), Some(Arc::new(value)));
        Ok(())
    }

    /// Appends a task and derives its edges against every earlier task.
    pub fn add_task<F>(
        &mut self,
        name: &str,
        reads: &[&str],
        writes: &[&str],
        body: F,
    ) -> Result<TaskId, GraphError>
    where
        F: FnOnce(&mut TaskContext<'_>) -> TaskResult + Send + 'static,
    {
        if self.tasks.iter().any(|t| t.name == name) {
            return Err(GraphError::DuplicateTaskName(name.to_string()));
        }
        for b in reads.iter().chain(writes) {
            if !self.buffers.contains_key(*b) {
                return Err(GraphError::UnknownBuffer(b.to_string()));
            }
        }
        let reads: BTreeSet<String> = reads.iter().map(|s| s.to_string()).collect();
        let writes: BTreeSet<String> = writes.iter().map(|s| s.to_string()).collect();
        let id = self.tasks.len();
        for (p, prior) in self.tasks.iter().enumerate() {
            let raw = !prior.writes.is_disjoint(&reads);
            let war = !prior.reads.is_disjoint(&writes);
            let waw = !prior.writes.is_disjoint(&writes);
            if raw || war || waw {
                self.edges.push((p, id));
            }
        }
        self.tasks.push(Task {
            name: name.to_string(),
            reads,
            writes,
            body: Box::new(body),
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task_names(&self) -> Vec<&str> {
        self.tasks.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn task_id(&self, name: &str) -> Option<TaskId> {
        self.tasks.iter().position(|t| t.name == name)
    }

    /// Derived edges `(from, to)` in derivation order.
    pub fn edges(&self) -> &[(TaskId, TaskId)] {
        &self.edges
    }

    pub fn named_edges(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.tasks[a].name.clone(), self.tasks[b].name.clone()))
            .collect()
    }

    /// Runs every task once on a pool of `workers` threads.
    ///
    /// The first failing or panicking task stops the graph: no further tasks
    /// are started, tasks already running finish, and the error names the
    /// failing task.
    pub fn execute(self, workers: usize) -> Result<GraphRun, GraphError> {
        if workers == 0 {
            return Err(GraphError::NoWorkers);
        }
        let n = self.tasks.len();
        let edges = self.edges.clone();
        let mut succ = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for &(a, b) in &edges {
            succ[a].push(b);
            indeg[b] += 1;
        }
        let mut meta = Vec::with_capacity(n);
        let mut bodies = Vec::with_capacity(n);
        for t in self.tasks {
            meta.push((t.name, t.reads, t.writes));
            bodies.push(Some(t.body));
        }
        let sched = Mutex::new(Sched {
            ready: (0..n).filter(|&t| indeg[t] == 0).collect(),
            indeg,
            bodies,
            done: 0,
            failed: None,
            entries: vec![None; n],
        });
        let wake = Condvar::new();
        let clock = AtomicU64::new(0);
        let store: Store = Mutex::new(self.buffers);

        std::thread::scope(|scope| {
            for worker in 0..workers.min(n.max(1)) {
                let (sched, wake, clock, store, meta, succ) =
                    (&sched, &wake, &clock, &store, &meta, &succ);
                scope.spawn(move || loop {
                    let (tid, body) = {
                        let mut s = lock(sched);
                        loop {
                            if s.failed.is_some() || s.done == n {
                                return;
                            }
                            if let Some(t) = s.ready.pop_front() {
                                let body = s.bodies[t].take().expect("task scheduled twice");
                                break (t, body);
                            }
                            s = wake.wait(s).unwrap_or_else(|e| e.into_inner());
                        }
                    };
                    let (name, reads, writes) = &meta[tid];
                    let mut ctx = TaskContext {
                        task: name,
                        reads,
                        writes,
                        store,
                    };
                    let start_tick = clock.fetch_add(1, Ordering::SeqCst);
                    let outcome = catch_unwind(AssertUnwindSafe(|| body(&mut ctx)));
                    let end_tick = clock.fetch_add(1, Ordering::SeqCst);

                    let mut s = lock(sched);
                    s.entries[tid] = Some(TraceEntry {
                        task: name.clone(),
                        worker,
                        start_tick,
                        end_tick,
                    });
                    match outcome {
                        Ok(Ok(())) => {
                            s.done += 1;
                            for &next in &succ[tid] {
                                s.indeg[next] -= 1;
                                if s.indeg[next] == 0 {
                                    s.ready.push_back(next);
                                }
                            }
                        }
                        Ok(Err(source)) => {
                            s.failed.get_or_insert(GraphError::TaskFailed {
                                task: name.clone(),
                                source,
                            });
                        }
                        Err(panic) => {
                            let message = panic
                                .downcast_ref::<&str>()
                                .map(|m| m.to_string())
                                .or_else(|| panic.downcast_ref::<String>().cloned())
                                .unwrap_or_else(|| "non-string panic payload".into());
                            s.failed.get_or_insert(GraphError::TaskPanicked {
                                task: name.clone(),
                                message,
                            });
                        }
                    }
                    wake.notify_all();
                });
            }
        });

        let s = sched.into_inner().unwrap_or_else(|e| e.into_inner());
        if let Some(e) = s.failed {
            return Err(e);
        }
        Ok(GraphRun {
            trace: ExecutionTrace {
                entries: s
                    .entries
                    .into_iter()
                    .map(|e| e.expect("every task ran"))
                    .collect(),
            },
            edges,
            buffers: store.into_inner().unwrap_or_else(|e| e.into_inner()),
        })
    }
}

struct Sched {
    ready: VecDeque<TaskId>,
    indeg: Vec<usize>,
    bodies: Vec<Option<Body>>,
    done: usize,
    failed: Option<GraphError>,
    entries: Vec<Option<TraceEntry>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub task: String,
    pub worker: usize,
    pub start_tick: u64,
    pub end_tick: u64,
}

/// Start/end ticks of every task, indexed by [`TaskId`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub entries: Vec<TraceEntry>,
}

impl ExecutionTrace {
    pub fn get(&self, task: &str) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.task == task)
    }

    /// True iff `end(a) <= start(b)` for every edge.
    pub fn respects(&self, edges: &[(TaskId, TaskId)]) -> bool {
        edges
            .iter()
            .all(|&(a, b)| self.entries[a].end_tick <= self.entries[b].start_tick)
    }

    /// Whether two tasks' execution intervals intersect.
    pub fn overlaps(&self, a: &str, b: &str) -> bool {
        match (self.get(a), self.get(b)) {
            (Some(x), Some(y)) => x.start_tick < y.end_tick && y.start_tick < x.end_tick,
            _ => false,
        }
    }

    pub fn overlapping_pairs(&self) -> Vec<(TaskId, TaskId)> {
        let mut out = Vec::new();
        for (i, x) in self.entries.iter().enumerate() {
            for (j, y) in self.entries.iter().enumerate().skip(i + 1) {
                if x.start_tick < y.end_tick && y.start_tick < x.end_tick {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Result of a successful [`TaskGraph::execute`].
pub struct GraphRun {
    pub trace: ExecutionTrace,
    pub edges: Vec<(TaskId, TaskId)>,
    buffers: BTreeMap<String, Option<BufferValue>>,
}

impl GraphRun {
    pub fn get<T: Any + Send + Sync>(&self, buffer: &str) -> Result<Arc<T>, GraphError> {
        let v = self
            .buffers
            .get(buffer)
            .ok_or_else(|| GraphError::UnknownBuffer(buffer.to_string()))?
            .clone()
            .ok_or_else(|| GraphError::EmptyBuffer {
                task: "<result>".into(),
                buffer: buffer.to_string(),
            })?;
        v.downcast::<T>().map_err(|_| GraphError::TypeMismatch {
            task: "<result>".into(),
            buffer: buffer.to_string(),
        })
    }
}
