#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use regionsim::rft::{DynamicCfg, RegionRecording};
use regionsim::trace_io::{LoopSpec, PlacedLoop, ProgramSpec, TraceItem};

pub fn item(a: u64) -> TraceItem {
    TraceItem::new(a, 4)
}

/// Walks a random graph: node `i` lives at `0x1000 + 4 * i`, falls through
/// to `i + 1` (wrapping to 0) and may also jump to its `extra` targets.
pub fn walk(extra: &[Vec<usize>], choices: &[u8]) -> Vec<TraceItem> {
    let n = extra.len();
    let mut cur = 0;
    let mut out = Vec::with_capacity(choices.len());
    for &c in choices {
        out.push(item(0x1000 + 4 * cur as u64));
        let mut succ = vec![(cur + 1) % n];
        succ.extend(&extra[cur]);
        cur = succ[c as usize % succ.len()];
    }
    out
}

pub fn walk_trace(max_nodes: usize, max_len: usize) -> impl Strategy<Value = Vec<TraceItem>> {
    (2..max_nodes)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(prop::collection::vec(0..n, 0..3), n),
                prop::collection::vec(any::<u8>(), 0..max_len),
            )
        })
        .prop_map(|(extra, choices)| walk(&extra, &choices))
}

fn loop_spec(depth: u32) -> BoxedStrategy<LoopSpec> {
    let leaf = (1u32..6, prop::sample::select(vec![1u32, 2, 4]), 0u64..6, prop::option::of((1u32..4, 1u64..4)))
        .prop_map(|(body, isize, iters, alt)| {
            let mut l = LoopSpec::new(body, isize, iters);
            if let Some((len, every)) = alt {
                l = l.with_alternate(len, every);
            }
            l
        });
    if depth == 0 {
        return leaf.boxed();
    }
    (leaf, prop::collection::vec((0u32..6, loop_spec(depth - 1)), 0..3))
        .prop_map(|(mut l, kids)| {
            for (after, inner) in kids {
                let after = after % l.body;
                l = l.with_child(after, inner);
            }
            l
        })
        .boxed()
}

/// Random valid programs: top-level loops are spaced far apart.
pub fn program_spec() -> impl Strategy<Value = ProgramSpec> {
    prop::collection::vec(loop_spec(2), 1..4).prop_map(|loops| {
        ProgramSpec::new(
            loops
                .into_iter()
                .enumerate()
                .map(|(i, spec)| PlacedLoop { base: 0x10_0000 * (i as u64 + 1), spec })
                .collect(),
        )
    })
}

fn oracle_span(l: &LoopSpec) -> u64 {
    let own = (l.body as u64 + l.alternate.map_or(0, |a| a.len as u64)) * l.isize as u64;
    own + l.children.iter().map(|c| oracle_span(&c.inner)).sum::<u64>()
}

fn oracle_walk(l: &LoopSpec, base: u64, out: &mut Vec<TraceItem>) {
    let isz = l.isize as u64;
    let main_span = l.body as u64 * isz + l.children.iter().map(|c| oracle_span(&c.inner)).sum::<u64>();
    for i in 0..l.iterations {
        if let Some(alt) = l.alternate {
            if (i / alt.every) % 2 == 1 {
                out.push(TraceItem::new(base, l.isize));
                for k in 0..alt.len as u64 {
                    out.push(TraceItem::new(base + main_span + k * isz, l.isize));
                }
                continue;
            }
        }
        let mut addr = base;
        for j in 0..l.body {
            out.push(TraceItem::new(addr, l.isize));
            addr += isz;
            for c in l.children.iter().filter(|c| c.after == j) {
                oracle_walk(&c.inner, addr, out);
                addr += oracle_span(&c.inner);
            }
        }
    }
}

/// Straightforward recursive interpretation of a loop nest.
pub fn walker_oracle(spec: &ProgramSpec) -> Vec<TraceItem> {
    let mut out = Vec::new();
    for l in &spec.loops {
        oracle_walk(&l.spec, l.base, &mut out);
    }
    out
}

/// Random graph as a CFG over small integer addresses.
pub fn random_cfg() -> impl Strategy<Value = (DynamicCfg, usize)> {
    (2usize..50)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::vec(0..n, 0..4), n)))
        .prop_map(|(n, adj)| {
            let mut g = DynamicCfg::new();
            for (from, succ) in adj.iter().enumerate() {
                for &to in succ {
                    g.add_edge(from as u64, 1, to as u64);
                }
            }
            (g, n)
        })
}

/// Addresses on walks leaving `rec` through non-recorded nodes and coming
/// back to the target set with at most `depth` outside nodes, found by
/// enumerating every such walk.
pub fn brute_force_expansion(cfg: &DynamicCfg, rec: &RegionRecording, depth: u32, extended: bool) -> BTreeSet<u64> {
    let recorded: BTreeSet<u64> = rec.addresses().collect();
    let entry = match rec.entry() {
        Some(e) => e,
        None => return BTreeSet::new(),
    };
    let target = |a: u64| if extended { recorded.contains(&a) } else { a == entry };
    let mut accepted = BTreeSet::new();

    fn extend(
        cfg: &DynamicCfg,
        path: &mut Vec<u64>,
        depth: usize,
        recorded: &BTreeSet<u64>,
        target: &dyn Fn(u64) -> bool,
        accepted: &mut BTreeSet<u64>,
    ) {
        let last = *path.last().unwrap();
        for &s in cfg.successors(last) {
            if target(s) {
                accepted.extend(path.iter().copied());
            }
            if !recorded.contains(&s) && path.len() < depth {
                path.push(s);
                extend(cfg, path, depth, recorded, target, accepted);
                path.pop();
            }
        }
    }

    let starts: BTreeSet<u64> = recorded
        .iter()
        .flat_map(|&r| cfg.successors(r).iter().copied())
        .filter(|s| !recorded.contains(s))
        .collect();
    for s in starts {
        let mut path = vec![s];
        if depth >= 1 {
            extend(cfg, &mut path, depth as usize, &recorded, &target, &mut accepted);
        }
    }
    accepted
}
