//! Synthetic loop-nest programs and the traces a straight-line interpreter
//! of them would execute.
//!
//! Layout is derived from the nest: a loop's instructions are laid out in
//! order from its base, each nested loop is placed directly after the parent
//! instruction it follows (so it runs after that instruction on every parent
//! iteration), and an alternate path's private instructions follow the whole
//! main span. Only top-level loops carry an explicit base address.
//!
//! The text form used by `gen-trace` is one loop per line, nesting by
//! indentation:
//!
//! ```text
//! # outer loop with an inner loop after its 2nd instruction
//! loop base=0x1000 body=4 isize=4 iters=20
//!   loop after=1 body=3 iters=5
//! loop base=0x8000 body=6 iters=40 alt=3 every=2
//! ```
//!
//! Keys: `base` (top-level only, hex with `0x` or decimal), `after`
//! (nested only, 0-based parent instruction index), `body`, `isize`
//! (default 4), `iters`, `alt` + `every` (alternate path length and switch
//! period in iterations).

use thiserror::Error;

use super::TraceItem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramSpec {
    pub loops: Vec<PlacedLoop>,
}

/// A top-level loop and its base address.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacedLoop {
    pub base: u64,
    pub spec: LoopSpec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopSpec {
    /// Own instructions per iteration, including the entry.
    pub body: u32,
    pub isize: u32,
    pub iterations: u64,
    pub children: Vec<NestedLoop>,
    pub alternate: Option<AlternatePath>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedLoop {
    /// Index of the parent instruction this loop runs after.
    pub after: u32,
    pub inner: LoopSpec,
}

/// A second body sharing the loop entry. Iteration `i` takes it when
/// `(i / every) % 2 == 1`; it runs the entry, then `len` private
/// instructions, then branches back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlternatePath {
    pub len: u32,
    pub every: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
}

impl SpecError {
    fn invalid(message: impl Into<String>) -> Self {
        Self::Invalid { line: None, message: message.into() }
    }
}

impl LoopSpec {
    pub fn new(body: u32, isize: u32, iterations: u64) -> Self {
        Self { body, isize, iterations, children: Vec::new(), alternate: None }
    }

    pub fn with_child(mut self, after: u32, inner: LoopSpec) -> Self {
        self.children.push(NestedLoop { after, inner });
        self
    }

    pub fn with_alternate(mut self, len: u32, every: u64) -> Self {
        self.alternate = Some(AlternatePath { len, every });
        self
    }

    /// Bytes occupied by this loop and everything nested in it.
    pub fn span(&self) -> Result<u64, SpecError> {
        let overflow = || SpecError::invalid("loop span overflows the address space");
        let own = (self.body as u64 + self.alternate.map_or(0, |a| a.len as u64))
            .checked_mul(self.isize as u64)
            .ok_or_else(overflow)?;
        self.children.iter().try_fold(own, |acc, c| {
            acc.checked_add(c.inner.span()?).ok_or_else(overflow)
        })
    }

    /// Dynamic instruction count, in closed form.
    pub fn trace_len(&self) -> u64 {
        let per_main = self.body as u64 + self.children.iter().map(|c| c.inner.trace_len()).sum::<u64>();
        let alt_iters = self.alternate.map_or(0, |a| alternate_iterations(self.iterations, a.every));
        let per_alt = 1 + self.alternate.map_or(0, |a| a.len as u64);
        (self.iterations - alt_iters) * per_main + alt_iters * per_alt
    }

    fn validate(&self) -> Result<(), SpecError> {
        if self.body == 0 {
            return Err(SpecError::invalid("body must be >= 1"));
        }
        if self.isize == 0 {
            return Err(SpecError::invalid("isize must be >= 1"));
        }
        if let Some(alt) = self.alternate {
            if alt.every == 0 {
                return Err(SpecError::invalid("alternate period `every` must be >= 1"));
            }
        }
        for c in &self.children {
            if c.after >= self.body {
                return Err(SpecError::invalid(format!(
                    "nested loop placed after instruction {} but parent body has {}",
                    c.after, self.body
                )));
            }
            c.inner.validate()?;
        }
        self.span().map(|_| ())
    }
}

/// Iterations in `0..iterations` that take the alternate path.
fn alternate_iterations(iterations: u64, every: u64) -> u64 {
    let period = 2 * every;
    (iterations / period) * every + (iterations % period).saturating_sub(every)
}

impl ProgramSpec {
    pub fn new(loops: Vec<PlacedLoop>) -> Self {
        Self { loops }
    }

    pub fn single(base: u64, spec: LoopSpec) -> Self {
        Self { loops: vec![PlacedLoop { base, spec }] }
    }

    /// Checks loop shapes and that top-level loops occupy disjoint ranges.
    pub fn validate(&self) -> Result<(), SpecError> {
        self.validate_indexed().map_err(|(_, e)| e)
    }

    /// Like `validate`, also naming the offending top-level loop.
    fn validate_indexed(&self) -> Result<(), (usize, SpecError)> {
        let mut ranges = Vec::with_capacity(self.loops.len());
        for (idx, l) in self.loops.iter().enumerate() {
            l.spec.validate().map_err(|e| (idx, e))?;
            let span = l.spec.span().map_err(|e| (idx, e))?;
            let end = l.base.checked_add(span).ok_or_else(|| {
                (idx, SpecError::invalid(format!("loop {idx} extends past the address space")))
            })?;
            ranges.push((l.base, end, idx));
        }
        ranges.sort_unstable();
        for pair in ranges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.0 < a.1 {
                let message = format!(
                    "loop {} [{:#x}, {:#x}) overlaps loop {} [{:#x}, {:#x})",
                    a.2, a.0, a.1, b.2, b.0, b.1
                );
                return Err((a.2.max(b.2), SpecError::invalid(message)));
            }
        }
        Ok(())
    }

    pub fn trace_len(&self) -> u64 {
        self.loops.iter().map(|l| l.spec.trace_len()).sum()
    }

    /// Generates the full trace.
    pub fn generate(&self) -> Result<Vec<TraceItem>, SpecError> {
        let mut out = Vec::with_capacity(self.trace_len().min(1 << 28) as usize);
        self.generate_into(|item| out.push(item))?;
        Ok(out)
    }

    /// Streams the trace to `sink` without materializing it.
    pub fn generate_into(&self, mut sink: impl FnMut(TraceItem)) -> Result<(), SpecError> {
        self.validate()?;
        let mut plans = Vec::new();
        let roots: Vec<usize> = self
            .loops
            .iter()
            .map(|l| lay_out(&l.spec, l.base, &mut plans))
            .collect();
        for root in roots {
            run_plan(&plans, root, &mut sink);
        }
        Ok(())
    }

    /// Parses the line-oriented text form described in the module docs.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        parse_spec(text)
    }
}

#[derive(Clone, Copy)]
enum Step {
    Instr(u64),
    Child(usize),
}

struct LoopPlan {
    isize: u32,
    iterations: u64,
    main: Vec<Step>,
    /// Entry plus private instructions, when an alternate path exists.
    alt: Option<(Vec<u64>, u64)>,
}

fn lay_out(spec: &LoopSpec, base: u64, plans: &mut Vec<LoopPlan>) -> usize {
    let isz = spec.isize as u64;
    let mut main = Vec::new();
    let mut addr = base;
    for j in 0..spec.body {
        main.push(Step::Instr(addr));
        addr += isz;
        for child in spec.children.iter().filter(|c| c.after == j) {
            let idx = lay_out(&child.inner, addr, plans);
            main.push(Step::Child(idx));
            addr += child.inner.span().expect("validated");
        }
    }
    let alt = spec.alternate.map(|a| {
        let mut path = vec![base];
        path.extend((0..a.len as u64).map(|k| addr + k * isz));
        (path, a.every)
    });
    plans.push(LoopPlan { isize: spec.isize, iterations: spec.iterations, main, alt });
    plans.len() - 1
}

fn run_plan(plans: &[LoopPlan], root: usize, sink: &mut impl FnMut(TraceItem)) {
    struct Frame {
        plan: usize,
        iter: u64,
        pc: usize,
    }
    let mut stack = vec![Frame { plan: root, iter: 0, pc: 0 }];
    while let Some(top) = stack.last_mut() {
        let plan = &plans[top.plan];
        if top.iter >= plan.iterations {
            stack.pop();
            continue;
        }
        let on_alt = plan.alt.as_ref().filter(|(_, every)| (top.iter / every) % 2 == 1);
        if let Some((path, _)) = on_alt {
            for &a in path {
                sink(TraceItem::new(a, plan.isize));
            }
            top.iter += 1;
            continue;
        }
        match plan.main.get(top.pc) {
            None => {
                top.iter += 1;
                top.pc = 0;
            }
            Some(Step::Instr(a)) => {
                sink(TraceItem::new(*a, plan.isize));
                top.pc += 1;
            }
            Some(Step::Child(idx)) => {
                let idx = *idx;
                top.pc += 1;
                stack.push(Frame { plan: idx, iter: 0, pc: 0 });
            }
        }
    }
}

fn parse_spec(text: &str) -> Result<ProgramSpec, SpecError> {
    // loops whose lines are still open, outermost first
    struct Open {
        indent: usize,
        line: usize,
        after: Option<u32>,
        base: Option<u64>,
        spec: LoopSpec,
    }

    fn close(stack: &mut Vec<Open>, top: &mut Vec<(usize, PlacedLoop)>, until: usize) {
        while stack.len() > until {
            let done = stack.pop().unwrap();
            match stack.last_mut() {
                Some(parent) => parent.spec.children.push(NestedLoop {
                    after: done.after.expect("checked at parse"),
                    inner: done.spec,
                }),
                None => top.push((
                    done.line,
                    PlacedLoop { base: done.base.expect("checked at parse"), spec: done.spec },
                )),
            }
        }
    }

    let mut stack: Vec<Open> = Vec::new();
    let mut top: Vec<(usize, PlacedLoop)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let syntax = |message: String| SpecError::Syntax { line, message };
        let indent = content.len() - content.trim_start().len();
        let mut words = content.split_whitespace();
        if words.next() != Some("loop") {
            return Err(syntax("expected a `loop` line".into()));
        }
        let depth = stack.iter().position(|o| o.indent >= indent).unwrap_or(stack.len());
        close(&mut stack, &mut top, depth);
        let nested = !stack.is_empty();

        let (mut base, mut after, mut body, mut isize, mut iters, mut alt, mut every) =
            (None, None, None, 4u32, None, None, None);
        for word in words {
            let (key, value) = word
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key=value, got `{word}`")))?;
            let num = parse_number(value).ok_or_else(|| syntax(format!("bad number `{value}` for `{key}`")))?;
            let small = || u32::try_from(num).map_err(|_| syntax(format!("`{key}` out of range")));
            match key {
                "base" => base = Some(num),
                "after" => after = Some(small()?),
                "body" => body = Some(small()?),
                "isize" => isize = small()?,
                "iters" => iters = Some(num),
                "alt" => alt = Some(small()?),
                "every" => every = Some(num),
                other => return Err(syntax(format!("unknown key `{other}`"))),
            }
        }
        match (nested, base, after) {
            (false, None, _) => return Err(syntax("top-level loop needs `base`".into())),
            (false, _, Some(_)) => return Err(syntax("`after` is only valid on nested loops".into())),
            (true, Some(_), _) => return Err(syntax("nested loops are placed by `after`, not `base`".into())),
            (true, _, None) => return Err(syntax("nested loop needs `after`".into())),
            _ => {}
        }
        let body = body.ok_or_else(|| syntax("missing `body`".into()))?;
        let iterations = iters.ok_or_else(|| syntax("missing `iters`".into()))?;
        let alternate = match (alt, every) {
            (None, None) => None,
            (Some(len), Some(every)) => Some(AlternatePath { len, every }),
            _ => return Err(syntax("`alt` and `every` must be given together".into())),
        };
        let spec = LoopSpec { body, isize, iterations, children: Vec::new(), alternate };
        if let Some(parent) = stack.last() {
            if after.unwrap() >= parent.spec.body {
                return Err(syntax(format!(
                    "`after={}` is past the parent body of {} instructions",
                    after.unwrap(),
                    parent.spec.body
                )));
            }
        }
        spec.validate().map_err(|e| match e {
            SpecError::Invalid { message, .. } => SpecError::Invalid { line: Some(line), message },
            other => other,
        })?;
        stack.push(Open { indent, line, after, base, spec });
    }
    close(&mut stack, &mut top, 0);

    let lines: Vec<usize> = top.iter().map(|(l, _)| *l).collect();
    let program = ProgramSpec { loops: top.into_iter().map(|(_, l)| l).collect() };
    program.validate_indexed().map_err(|(idx, e)| match e {
        SpecError::Invalid { message, line: None } => SpecError::Invalid { line: lines.get(idx).copied(), message },
        other => other,
    })?;
    Ok(program)
}

fn parse_number(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}
