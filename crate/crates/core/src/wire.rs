//! Line protocol for out-of-process workers, version 1.
//!
//! Every message is one line of space-separated tokens. Reals travel as the
//! 16 hex digits of their IEEE-754 bit pattern, so values cross the process
//! boundary exactly. Task ids are `N <i> <m>` (quadrature node), `S <k>`
//! (Monte-Carlo sample) or `C <k>` (reporting rollout).
//!
//! ```text
//! master → worker                            worker → master
//! HELLO <version>                            READY <version> <dim>
//! THETA <d> <θ_1> … <θ_d>
//! FRAME <d> <M> <Ξ row-major, d²> <σ, d>
//! NOFRAME
//! TASK <id> <seed> <checksum>                OK <id> <value> <wall_ns>
//! TASKP <id> <seed> <checksum> <x_1> … <x_d> ERR <id> <message>
//! QUIT
//! ```
//!
//! `THETA` and `FRAME` are the per-iteration broadcast. A `TASK` line names a
//! node or reporting point that the worker rebuilds from the broadcast and
//! checks against `checksum` (FNV-1a over the coordinates' bit patterns), so
//! the only per-task payload is a handful of integers. Points that cannot be
//! rebuilt (Monte-Carlo samples) are sent in full with `TASKP`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::directions::{DirectionMatrix, SmoothingRadii};
use crate::error::{invalid, Error, Result};
use crate::parallel::{partition, Broadcast, EvalBatch, EvalResult, EvalTask, Evaluator, TaskId};
use crate::quadrature::QuadratureRule;
use crate::smoothing::{node_offset, node_point, Objective};

pub const PROTOCOL_VERSION: u32 = 1;

/// FNV-1a over the bit patterns of `point`.
pub fn point_checksum(point: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in point {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn proto(msg: impl Into<String>) -> Error {
    Error::Protocol(msg.into())
}

pub fn encode_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

pub fn decode_f64(tok: &str) -> Result<f64> {
    if tok.len() != 16 {
        return Err(proto(format!("malformed real '{tok}'")));
    }
    u64::from_str_radix(tok, 16).map(f64::from_bits).map_err(|_| proto(format!("malformed real '{tok}'")))
}

fn encode_id(id: TaskId) -> String {
    match id {
        TaskId::Node { direction, node } => format!("N {direction} {node}"),
        TaskId::Sample(k) => format!("S {k}"),
        TaskId::Center(k) => format!("C {k}"),
    }
}

struct Tokens<'a> {
    inner: std::str::SplitWhitespace<'a>,
    line: &'a str,
}

impl<'a> Tokens<'a> {
    fn new(line: &'a str) -> Self {
        Self { inner: line.split_whitespace(), line }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.inner.next().ok_or_else(|| proto(format!("truncated message '{}'", self.line.trim_end())))
    }

    fn int<T: std::str::FromStr>(&mut self) -> Result<T> {
        let w = self.word()?;
        w.parse().map_err(|_| proto(format!("malformed integer '{w}' in '{}'", self.line.trim_end())))
    }

    fn real(&mut self) -> Result<f64> {
        decode_f64(self.word()?)
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.real()).collect()
    }

    fn id(&mut self) -> Result<TaskId> {
        match self.word()? {
            "N" => Ok(TaskId::node(self.int()?, self.int()?)),
            "S" => Ok(TaskId::Sample(self.int()?)),
            "C" => Ok(TaskId::Center(self.int()?)),
            other => Err(proto(format!("unknown task kind '{other}'"))),
        }
    }

    fn rest(self) -> String {
        self.inner.collect::<Vec<_>>().join(" ")
    }

    fn finish(mut self) -> Result<()> {
        match self.inner.next() {
            None => Ok(()),
            Some(extra) => Err(proto(format!("unexpected token '{extra}' in '{}'", self.line.trim_end()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Hello { version: u32 },
    Theta(Vec<f64>),
    Frame { frame: DirectionMatrix, radii: SmoothingRadii, order: usize },
    NoFrame,
    Task { id: TaskId, seed: u64, checksum: u64, point: Option<Vec<f64>> },
    Quit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Ready { version: u32, dim: usize },
    Ok { id: TaskId, value: f64, wall_ns: u64 },
    Err { id: TaskId, message: String },
}

fn join_reals(out: &mut String, xs: &[f64]) {
    for &x in xs {
        out.push(' ');
        out.push_str(&encode_f64(x));
    }
}

impl Request {
    pub fn encode(&self) -> String {
        let mut s = String::new();
        match self {
            Request::Hello { version } => s = format!("HELLO {version}"),
            Request::Theta(theta) => {
                s = format!("THETA {}", theta.len());
                join_reals(&mut s, theta);
            }
            Request::Frame { frame, radii, order } => {
                s = format!("FRAME {} {order}", frame.dim());
                join_reals(&mut s, frame.as_slice());
                join_reals(&mut s, radii.values());
            }
            Request::NoFrame => s.push_str("NOFRAME"),
            Request::Task { id, seed, checksum, point: None } => {
                s = format!("TASK {} {seed} {checksum}", encode_id(*id));
            }
            Request::Task { id, seed, checksum, point: Some(p) } => {
                s = format!("TASKP {} {seed} {checksum}", encode_id(*id));
                join_reals(&mut s, p);
            }
            Request::Quit => s.push_str("QUIT"),
        }
        s
    }

    /// Parses one request line. `dim` is the worker's parameter dimension,
    /// needed to size explicit points.
    pub fn decode(line: &str, dim: usize) -> Result<Self> {
        let mut t = Tokens::new(line);
        let req = match t.word()? {
            "HELLO" => Request::Hello { version: t.int()? },
            "THETA" => {
                let n: usize = t.int()?;
                Request::Theta(t.reals(n)?)
            }
            "FRAME" => {
                let d: usize = t.int()?;
                let order: usize = t.int()?;
                let entries = t.reals(d * d)?;
                let radii = SmoothingRadii::new(t.reals(d)?)?;
                let rows: Vec<Vec<f64>> = entries.chunks_exact(d.max(1)).map(<[f64]>::to_vec).collect();
                Request::Frame { frame: DirectionMatrix::from_rows(&rows)?, radii, order }
            }
            "NOFRAME" => Request::NoFrame,
            "TASK" => Request::Task { id: t.id()?, seed: t.int()?, checksum: t.int()?, point: None },
            "TASKP" => {
                let id = t.id()?;
                let seed = t.int()?;
                let checksum = t.int()?;
                Request::Task { id, seed, checksum, point: Some(t.reals(dim)?) }
            }
            "QUIT" => Request::Quit,
            other => return Err(proto(format!("unknown request '{other}'"))),
        };
        t.finish()?;
        Ok(req)
    }
}

impl Response {
    pub fn encode(&self) -> String {
        match self {
            Response::Ready { version, dim } => format!("READY {version} {dim}"),
            Response::Ok { id, value, wall_ns } => format!("OK {} {} {wall_ns}", encode_id(*id), encode_f64(*value)),
            Response::Err { id, message } => {
                let flat: String = message.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
                format!("ERR {} {flat}", encode_id(*id))
            }
        }
    }

    pub fn decode(line: &str) -> Result<Self> {
        let mut t = Tokens::new(line);
        match t.word()? {
            "READY" => {
                let r = Response::Ready { version: t.int()?, dim: t.int()? };
                t.finish()?;
                Ok(r)
            }
            "OK" => {
                let r = Response::Ok { id: t.id()?, value: t.real()?, wall_ns: t.int()? };
                t.finish()?;
                Ok(r)
            }
            "ERR" => {
                let id = t.id()?;
                Ok(Response::Err { id, message: t.rest() })
            }
            other => Err(proto(format!("unknown response '{other}'"))),
        }
    }
}

/// Worker-side view of the current broadcast.
#[derive(Debug, Default)]
struct WorkerState {
    theta: Option<Vec<f64>>,
    frame: Option<(DirectionMatrix, SmoothingRadii, QuadratureRule)>,
}

impl WorkerState {
    fn rebuild(&self, id: TaskId) -> std::result::Result<Vec<f64>, String> {
        let theta = self.theta.as_ref().ok_or("no THETA broadcast received")?;
        match id {
            TaskId::Center(_) => Ok(theta.clone()),
            TaskId::Node { direction, node } => {
                let (frame, radii, rule) = self.frame.as_ref().ok_or("no FRAME broadcast received")?;
                if direction >= frame.dim() || node >= rule.order() {
                    return Err(format!("task {id} is outside the broadcast frame"));
                }
                let offset = node_offset(radii.values()[direction], rule.nodes()[node]);
                Ok(node_point(theta, frame.row(direction), offset))
            }
            TaskId::Sample(_) => Err("sample points must be sent explicitly".into()),
        }
    }
}

fn send<W: Write>(w: &mut W, line: &str) -> Result<()> {
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Runs the worker side of the protocol until `QUIT` or end of input.
///
/// Evaluation failures are reported per task with `ERR`; malformed input
/// ends the session with [`Error::Protocol`].
pub fn serve<R: BufRead, W: Write>(objective: &dyn Objective, input: R, mut output: W) -> Result<()> {
    let dim = objective.dimension();
    let mut state = WorkerState::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match Request::decode(&line, dim)? {
            Request::Hello { version } => {
                if version != PROTOCOL_VERSION {
                    return Err(proto(format!("master speaks version {version}, worker speaks {PROTOCOL_VERSION}")));
                }
                send(&mut output, &Response::Ready { version: PROTOCOL_VERSION, dim }.encode())?;
            }
            Request::Theta(theta) => {
                if theta.len() != dim {
                    return Err(proto(format!("THETA has {} entries, worker dimension is {dim}", theta.len())));
                }
                state.theta = Some(theta);
            }
            Request::Frame { frame, radii, order } => {
                if frame.dim() != dim {
                    return Err(proto(format!("FRAME is {}-dimensional, worker dimension is {dim}", frame.dim())));
                }
                state.frame = Some((frame, radii, QuadratureRule::gauss_hermite(order)?));
            }
            Request::NoFrame => state.frame = None,
            Request::Task { id, seed, checksum, point } => {
                let point = match point {
                    Some(p) => Ok(p),
                    None => state.rebuild(id),
                };
                let response = match point {
                    Err(message) => Response::Err { id, message },
                    Ok(p) if point_checksum(&p) != checksum => {
                        Response::Err { id, message: format!("checksum mismatch for {id}") }
                    }
                    Ok(p) => {
                        let start = Instant::now();
                        match objective.evaluate(&p, seed) {
                            Ok(value) => Response::Ok { id, value, wall_ns: start.elapsed().as_nanos() as u64 },
                            Err(e) => Response::Err { id, message: e.0 },
                        }
                    }
                };
                send(&mut output, &response.encode())?;
            }
            Request::Quit => break,
        }
    }
    Ok(())
}

/// One master-side connection to a worker.
pub struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    line: String,
}

impl Connection {
    pub fn new(reader: Box<dyn BufRead + Send>, writer: Box<dyn Write + Send>) -> Self {
        Self { reader, writer, line: String::new() }
    }

    fn send(&mut self, req: &Request) -> Result<()> {
        send(&mut self.writer, &req.encode())
    }

    fn recv(&mut self) -> Result<Response> {
        self.line.clear();
        if self.reader.read_line(&mut self.line)? == 0 {
            return Err(proto("worker closed the connection"));
        }
        Response::decode(&self.line)
    }

    fn handshake(&mut self) -> Result<usize> {
        self.send(&Request::Hello { version: PROTOCOL_VERSION })?;
        match self.recv()? {
            Response::Ready { version, dim } if version == PROTOCOL_VERSION => Ok(dim),
            Response::Ready { version, .. } => Err(proto(format!("worker speaks version {version}"))),
            other => Err(proto(format!("expected READY, got {other:?}"))),
        }
    }

    fn broadcast(&mut self, b: &Broadcast) -> Result<()> {
        self.send(&Request::Theta(b.theta.clone()))?;
        match &b.frame {
            Some((frame, radii, order)) => {
                self.send(&Request::Frame { frame: frame.clone(), radii: radii.clone(), order: *order })
            }
            None => self.send(&Request::NoFrame),
        }
    }

    /// Evaluates one task in lockstep. `Ok(Err(msg))` is a task failure.
    fn run(&mut self, task: &EvalTask, rebuildable: bool) -> Result<std::result::Result<EvalResult, String>> {
        let checksum = point_checksum(&task.point);
        let point = (!rebuildable).then(|| task.point.clone());
        self.send(&Request::Task { id: task.id, seed: task.seed, checksum, point })?;
        match self.recv()? {
            Response::Ok { id, value, wall_ns } if id == task.id => {
                Ok(Ok(EvalResult { id, value, wall_time: Duration::from_nanos(wall_ns) }))
            }
            Response::Err { id, message } if id == task.id => Ok(Err(message)),
            other => Err(proto(format!("expected a reply for {}, got {other:?}", task.id))),
        }
    }
}

/// Master side of a pool of protocol workers (child processes or any other
/// pair of byte streams).
pub struct ProcessPool {
    conns: Vec<Mutex<Connection>>,
    children: Vec<Child>,
    dim: usize,
}

/// Task index and result (or worker error) from one worker's block.
type Outcome = (usize, std::result::Result<EvalResult, String>);

impl ProcessPool {
    /// Spawns `workers` copies of `program args…`, each speaking the
    /// protocol on stdin/stdout.
    pub fn spawn(program: &std::path::Path, args: &[String], workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("worker count must be at least 1"));
        }
        let mut children = Vec::with_capacity(workers);
        let mut conns = Vec::with_capacity(workers);
        for _ in 0..workers {
            let mut child = Command::new(program)
                .args(args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| Error::Io(format!("cannot start worker {}: {e}", program.display())))?;
            let stdin: ChildStdin = child.stdin.take().ok_or_else(|| proto("worker stdin unavailable"))?;
            let stdout: ChildStdout = child.stdout.take().ok_or_else(|| proto("worker stdout unavailable"))?;
            conns.push(Connection::new(Box::new(BufReader::new(stdout)), Box::new(stdin)));
            children.push(child);
        }
        let mut pool = Self::connect_inner(conns)?;
        pool.children = children;
        Ok(pool)
    }

    /// Uses already-open connections, performing the handshake on each.
    pub fn connect(conns: Vec<Connection>) -> Result<Self> {
        Self::connect_inner(conns)
    }

    fn connect_inner(mut conns: Vec<Connection>) -> Result<Self> {
        if conns.is_empty() {
            return Err(invalid("worker count must be at least 1"));
        }
        let mut dim = None;
        for c in &mut conns {
            let d = c.handshake()?;
            if dim.is_some_and(|x| x != d) {
                return Err(proto("workers disagree on the parameter dimension"));
            }
            dim = Some(d);
        }
        Ok(Self {
            conns: conns.into_iter().map(Mutex::new).collect(),
            children: Vec::new(),
            dim: dim.unwrap_or_default(),
        })
    }

    /// Parameter dimension reported by the workers.
    pub fn dimension(&self) -> usize {
        self.dim
    }

    fn run_round(
        &self,
        blocks: &[Vec<&EvalTask>],
        rebuild: &(dyn Fn(&EvalTask) -> bool + Sync),
    ) -> Result<Vec<Vec<Outcome>>> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = blocks
                .iter()
                .enumerate()
                .map(|(w, block)| {
                    let conn = &self.conns[w];
                    scope.spawn(move || -> Result<Vec<_>> {
                        let mut conn = conn.lock().map_err(|_| proto("worker connection poisoned"))?;
                        block.iter().enumerate().map(|(k, t)| Ok((k, conn.run(t, rebuild(t))?))).collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().map_err(|_| proto("worker thread panicked"))?).collect()
        })
    }
}

impl Evaluator for ProcessPool {
    fn execute(&self, batch: &EvalBatch, objective: &dyn Objective) -> Result<Vec<EvalResult>> {
        if objective.dimension() != self.dim {
            return Err(invalid(format!(
                "objective dimension {} differs from worker dimension {}",
                objective.dimension(),
                self.dim
            )));
        }
        let tasks = &batch.tasks;
        let active = self.conns.len().min(tasks.len()).max(1);
        if let Some(b) = &batch.broadcast {
            for c in &self.conns[..active] {
                c.lock().map_err(|_| proto("worker connection poisoned"))?.broadcast(b)?;
            }
        }
        let has_frame = batch.broadcast.as_ref().is_some_and(|b| b.frame.is_some());
        let has_theta = batch.broadcast.is_some();
        let rebuild = move |t: &EvalTask| match t.id {
            TaskId::Node { .. } => has_frame,
            TaskId::Center(_) => has_theta,
            TaskId::Sample(_) => false,
        };

        let blocks: Vec<Vec<&EvalTask>> = (0..active)
            .map(|w| {
                let (s, e) = partition(tasks.len(), active, w);
                tasks[s..e].iter().collect()
            })
            .collect();
        let mut results = Vec::with_capacity(tasks.len());
        let mut retry: Vec<Vec<&EvalTask>> = vec![Vec::new(); active];
        for (w, outs) in self.run_round(&blocks, &rebuild)?.into_iter().enumerate() {
            for (k, out) in outs {
                match out {
                    Ok(r) => results.push(r),
                    Err(_) => retry[(w + 1) % active].push(blocks[w][k]),
                }
            }
        }
        if retry.iter().any(|b| !b.is_empty()) {
            for (w, outs) in self.run_round(&retry, &rebuild)?.into_iter().enumerate() {
                for (k, out) in outs {
                    match out {
                        Ok(r) => results.push(r),
                        Err(message) => return Err(Error::Evaluation { task: Some(retry[w][k].id), message }),
                    }
                }
            }
        }
        results.sort_by_key(|r| r.id);
        Ok(results)
    }

    fn workers(&self) -> usize {
        self.conns.len()
    }
}

impl Drop for ProcessPool {
    fn drop(&mut self) {
        for c in &self.conns {
            if let Ok(mut c) = c.lock() {
                let _ = c.send(&Request::Quit);
            }
        }
        for child in &mut self.children {
            let _ = child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::{init_frame, perturb_frame};
    use crate::parallel::{execute, plan_mc_tasks, plan_tasks, LocalPool};
    use crate::smoothing::{EvalError, FnObjective, SeedSchedule};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn sin_sum(d: usize) -> Arc<dyn Objective> {
        Arc::new(FnObjective::new(d, |t: &[f64], s| t.iter().map(|x| x.sin()).sum::<f64>() + (s % 7) as f64))
    }

    /// Spawns `n` in-process workers connected through OS pipes.
    fn pipe_pool(objective: Arc<dyn Objective>, n: usize) -> (ProcessPool, Vec<std::thread::JoinHandle<Result<()>>>) {
        let mut conns = Vec::new();
        let mut handles = Vec::new();
        for _ in 0..n {
            let (req_r, req_w) = std::io::pipe().unwrap();
            let (resp_r, resp_w) = std::io::pipe().unwrap();
            let obj = Arc::clone(&objective);
            handles.push(std::thread::spawn(move || serve(obj.as_ref(), BufReader::new(req_r), resp_w)));
            conns.push(Connection::new(Box::new(BufReader::new(resp_r)), Box::new(req_w)));
        }
        (ProcessPool::connect(conns).unwrap(), handles)
    }

    #[test]
    fn request_lines_round_trip() {
        let frame = perturb_frame(&init_frame(3), 1.0, 2);
        let radii = SmoothingRadii::new(vec![0.9, 1.0, 1.1]).unwrap();
        let reqs = vec![
            Request::Hello { version: 1 },
            Request::Theta(vec![0.1, -0.0, f64::MAX]),
            Request::Frame { frame, radii, order: 7 },
            Request::NoFrame,
            Request::Task { id: TaskId::node(2, 6), seed: u64::MAX, checksum: 17, point: None },
            Request::Task { id: TaskId::Sample(4), seed: 3, checksum: 1, point: Some(vec![1.5, 2.5, -3.5]) },
            Request::Quit,
        ];
        for r in reqs {
            assert_eq!(Request::decode(&r.encode(), 3).unwrap(), r);
        }
    }

    #[test]
    fn response_lines_round_trip() {
        let resps = vec![
            Response::Ready { version: 1, dim: 114 },
            Response::Ok { id: TaskId::Center(3), value: -1.25e-300, wall_ns: 99 },
            Response::Err { id: TaskId::node(0, 1), message: "bad thing happened".into() },
        ];
        for r in resps {
            assert_eq!(Response::decode(&r.encode()).unwrap(), r);
        }
        assert_eq!(Response::Err { id: TaskId::Sample(0), message: "a\nb".into() }.encode(), "ERR S 0 a b");
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for bad in ["", "HELLO", "HELLO x", "THETA 2 3ff0000000000000", "TASK Q 1 2 3", "TASK N 1 2 3 4 5", "NOPE"] {
            assert!(matches!(Request::decode(bad, 2), Err(Error::Protocol(_))), "{bad}");
        }
        assert!(Response::decode("OK C 1 zz 3").is_err());
        assert!(decode_f64("3ff").is_err());
    }

    #[test]
    fn exact_real_encoding() {
        for x in [0.1, -0.0, f64::MIN_POSITIVE, 1e308, std::f64::consts::PI] {
            assert_eq!(decode_f64(&encode_f64(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn serve_handles_a_session() {
        let f = sin_sum(2);
        let theta = vec![0.5, -0.25];
        let input = [
            Request::Hello { version: 1 }.encode(),
            Request::Theta(theta.clone()).encode(),
            Request::NoFrame.encode(),
            Request::Task { id: TaskId::Center(0), seed: 3, checksum: point_checksum(&theta), point: None }.encode(),
            Request::Task { id: TaskId::Center(1), seed: 3, checksum: 0, point: None }.encode(),
            Request::Task { id: TaskId::node(0, 0), seed: 3, checksum: 0, point: None }.encode(),
            Request::Quit.encode(),
            "garbage after quit".into(),
        ]
        .join("\n");
        let mut out = Vec::new();
        serve(f.as_ref(), input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Response> =
            String::from_utf8(out).unwrap().lines().map(|l| Response::decode(l).unwrap()).collect();
        assert_eq!(lines[0], Response::Ready { version: 1, dim: 2 });
        match &lines[1] {
            Response::Ok { id, value, .. } => {
                assert_eq!(*id, TaskId::Center(0));
                assert_eq!(*value, f.evaluate(&theta, 3).unwrap());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(&lines[2], Response::Err { message, .. } if message.contains("checksum")));
        assert!(matches!(&lines[3], Response::Err { message, .. } if message.contains("FRAME")));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn serve_rejects_version_mismatch() {
        let mut out = Vec::new();
        assert!(serve(sin_sum(2).as_ref(), "HELLO 9\n".as_bytes(), &mut out).is_err());
    }

    #[test]
    fn pool_matches_in_process_execution_bitwise() {
        let d = 5;
        let f = sin_sum(d);
        let rule = QuadratureRule::gauss_hermite(7).unwrap();
        let frame = perturb_frame(&init_frame(d), 2.0, 8);
        let radii = SmoothingRadii::new(vec![0.8, 0.9, 1.0, 1.1, 1.2]).unwrap();
        let theta = vec![0.3, -0.1, 0.0, 2.0, -1.5];
        let mut tasks = plan_tasks(&theta, &frame, &radii, &rule, SeedSchedule::PerNode(4)).unwrap();
        tasks.push(EvalTask { id: TaskId::Center(0), point: theta.clone(), seed: 11 });
        let batch = EvalBatch::new(tasks.clone())
            .with_broadcast(Broadcast { theta: theta.clone(), frame: Some((frame, radii, 7)) });
        let want = LocalPool::new(1).unwrap().execute(&batch, f.as_ref()).unwrap();
        for l in [1, 3, 8] {
            let (pool, handles) = pipe_pool(Arc::clone(&f), l);
            assert_eq!(pool.workers(), l);
            let got = pool.execute(&batch, f.as_ref()).unwrap();
            let strip = |v: &[EvalResult]| v.iter().map(|r| (r.id, r.value.to_bits())).collect::<Vec<_>>();
            assert_eq!(strip(&got), strip(&want));
            drop(pool);
            for h in handles {
                h.join().unwrap().unwrap();
            }
        }
    }

    #[test]
    fn explicit_points_for_samples_and_missing_broadcast() {
        let f = sin_sum(3);
        let (tasks, _) = plan_mc_tasks(&[0.0, 1.0, 2.0], 0.5, 9, 4, None);
        let batch = EvalBatch::new(tasks.clone());
        let (pool, _handles) = pipe_pool(Arc::clone(&f), 2);
        let got = pool.execute(&batch, f.as_ref()).unwrap();
        let want = execute(&tasks, f.as_ref(), 1).unwrap();
        assert_eq!(got.iter().map(|r| r.value).collect::<Vec<_>>(), want.iter().map(|r| r.value).collect::<Vec<_>>());
    }

    #[test]
    fn failing_tasks_surface_with_their_id() {
        let f: Arc<dyn Objective> = Arc::new(FnObjective::new(1, |t: &[f64], _| t[0]));
        struct Picky;
        impl Objective for Picky {
            fn dimension(&self) -> usize {
                1
            }
            fn evaluate(&self, t: &[f64], _: u64) -> Result<f64, EvalError> {
                if t[0] > 2.5 {
                    Err(EvalError("too big".into()))
                } else {
                    Ok(t[0])
                }
            }
        }
        let tasks: Vec<EvalTask> =
            (0..4).map(|k| EvalTask { id: TaskId::Sample(k), point: vec![k as f64], seed: 0 }).collect();
        let (pool, _h) = pipe_pool(Arc::new(Picky), 2);
        match pool.execute(&EvalBatch::new(tasks), f.as_ref()).unwrap_err() {
            Error::Evaluation { task: Some(TaskId::Sample(3)), message } => assert_eq!(message, "too big"),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn checksum_detects_single_bit_flips(xs in proptest::collection::vec(-1e6f64..1e6, 1..20), k in any::<prop::sample::Index>(), bit in 0u32..64) {
            let mut ys = xs.clone();
            let i = k.index(ys.len());
            ys[i] = f64::from_bits(ys[i].to_bits() ^ (1u64 << bit));
            prop_assert_ne!(point_checksum(&xs), point_checksum(&ys));
        }
    }
}
