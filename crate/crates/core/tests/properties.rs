mod common;

use std::collections::{BTreeSet, HashMap};
use std::io::Cursor;

use common::{item, program_spec, random_cfg, walk_trace, walker_oracle};
use proptest::prelude::*;
use regionsim::automaton::{StateId, NTE};
use regionsim::cost::{estimate_times, CostParams};
use regionsim::engine::{run_simulation, run_sweep, Simulator};
use regionsim::rft::{last_iteration, mret2_intersect, netplus_expand, RegionRecording, RftConfig, Technique};
use regionsim::trace_io::{write_trace, TraceFormat, TraceItem, TraceReader, Window};
use regionsim::SimulationConfig;

fn encode(items: &[TraceItem], format: TraceFormat) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(&mut buf, format, items).unwrap();
    buf
}

fn decode(bytes: &[u8], format: TraceFormat, window: Window) -> Vec<TraceItem> {
    TraceReader::new(Cursor::new(bytes), format, window).unwrap().collect::<Result<_, _>>().unwrap()
}

fn arb_items() -> impl Strategy<Value = Vec<TraceItem>> {
    prop::collection::vec((any::<u64>(), 1u32..16).prop_map(|(a, s)| TraceItem::new(a, s)), 0..200)
}

fn arb_rft() -> impl Strategy<Value = RftConfig> {
    (prop::sample::select(Technique::ALL.to_vec()), 1u32..6, 1usize..40, 1u32..6, 2usize..64).prop_map(
        |(t, thr, max, depth, buf)| {
            RftConfig::new(t).with_threshold(thr).with_max_region_size(max).with_depth(depth).with_lei_buffer(buf)
        },
    )
}

fn replay(trace: &[TraceItem], rft: RftConfig) -> Simulator {
    let mut s = Simulator::new(SimulationConfig::new(rft)).unwrap();
    for i in trace {
        s.consume(i).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trace_round_trip(items in arb_items()) {
        for format in [TraceFormat::Binary, TraceFormat::Text] {
            prop_assert_eq!(decode(&encode(&items, format), format, Window::ALL), items.clone());
        }
    }

    #[test]
    fn window_yields_expected_slice(items in arb_items(), skip in 0u64..250, limit in prop::option::of(0u64..250)) {
        let w = Window::new(skip, limit);
        for format in [TraceFormat::Binary, TraceFormat::Text] {
            let got = decode(&encode(&items, format), format, w);
            let expected: Vec<_> =
                items.iter().skip(skip as usize).take(limit.map_or(usize::MAX, |l| l as usize)).copied().collect();
            prop_assert_eq!(got.len() as u64, w.yielded(items.len() as u64));
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn generator_matches_walker(spec in program_spec()) {
        let items = spec.generate().unwrap();
        prop_assert_eq!(items.len() as u64, spec.trace_len());
        prop_assert_eq!(items, walker_oracle(&spec));
    }

    #[test]
    fn state_executions_equal_incoming_edges(trace in walk_trace(30, 2000), rft in arb_rft()) {
        let sim = replay(&trace, rft);
        let a = sim.automaton();
        let mut incoming: HashMap<StateId, u64> = HashMap::new();
        for s in 0..a.num_states() {
            for (_, target, count) in a.edges(StateId(s as u32)) {
                *incoming.entry(target).or_default() += count;
            }
        }
        for s in 1..a.num_states() {
            let id = StateId(s as u32);
            prop_assert_eq!(a.state_executions(id), incoming.get(&id).copied().unwrap_or(0));
        }
        let total: u64 = (0..a.num_states()).map(|s| a.state_executions(StateId(s as u32))).sum();
        prop_assert_eq!(total, trace.len() as u64);
    }

    #[test]
    fn address_index_lists_each_state_once(trace in walk_trace(30, 2000), rft in arb_rft()) {
        let sim = replay(&trace, rft);
        let a = sim.automaton();
        let mut seen = BTreeSet::new();
        let addresses: BTreeSet<u64> = (1..a.num_states()).filter_map(|s| a.state_address(StateId(s as u32))).collect();
        for addr in addresses {
            for &id in a.states_at(addr) {
                prop_assert!(id != NTE);
                prop_assert_eq!(a.state_address(id), Some(addr));
                prop_assert!(seen.insert(id), "state {:?} listed twice", id);
            }
        }
        prop_assert_eq!(seen.len(), a.num_states() - 1);
    }

    #[test]
    fn report_invariants_hold(trace in walk_trace(30, 2000), rft in arb_rft()) {
        let r = run_simulation(&trace, &SimulationConfig::new(rft)).unwrap().report;
        prop_assert!(r.check_invariants().is_ok());
        if let Some(d) = r.duplication_ratio {
            prop_assert!((0.0..1.0).contains(&d));
        }
        if let Some(avg) = r.avg_static_region_size {
            prop_assert!((avg * r.num_regions as f64 - r.hot_static_size as f64).abs() < 1e-6);
        }
        if let Some(c) = r.completion_ratio {
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn expansion_grows_with_depth((cfg, n) in random_cfg(), len in 1usize..6, start in 0u64..50, extended in any::<bool>()) {
        let addrs: BTreeSet<u64> = (0..len as u64).map(|k| (start + k) % n as u64).collect();
        let rec = RegionRecording::from_items(addrs.into_iter().map(|a| TraceItem::new(a, 1)).collect());
        let mut prev: BTreeSet<u64> = BTreeSet::new();
        for depth in 0..8 {
            let cur: BTreeSet<u64> = netplus_expand(&cfg, &rec, depth, extended).addresses().collect();
            prop_assert!(prev.is_subset(&cur));
            prev = cur;
        }
    }

    #[test]
    fn cost_is_linear_in_parameters(trace in walk_trace(20, 1000), p in prop::array::uniform5(0u64..50), q in prop::array::uniform5(0u64..50)) {
        let r = run_simulation(&trace, &SimulationConfig::new(RftConfig::new(Technique::Net).with_threshold(2))).unwrap().report;
        let cp = |v: [u64; 5]| CostParams::from_integers(v[0], v[1], v[2], v[3], v[4]);
        let sum: [u64; 5] = std::array::from_fn(|i| p[i] + q[i]);
        let (a, b, c) = (estimate_times(&r, &cp(p)), estimate_times(&r, &cp(q)), estimate_times(&r, &cp(sum)));
        prop_assert_eq!(a.total_time + b.total_time, c.total_time);
        prop_assert_eq!(a.baseline_time + b.baseline_time, c.baseline_time);
        prop_assert_eq!(c.total_time, c.interp_time + c.native_time + c.gen_time + c.transition_time);
    }

    #[test]
    fn last_iteration_is_distinct_subsequence(addrs in prop::collection::vec(0u64..12, 0..80)) {
        let slice: Vec<_> = addrs.iter().map(|&a| item(a)).collect();
        let out = last_iteration(&slice);
        let distinct: BTreeSet<u64> = out.iter().map(|i| i.address).collect();
        prop_assert_eq!(distinct.len(), out.len());
        let mut it = slice.iter();
        for o in &out {
            prop_assert!(it.any(|s| s == o), "not a subsequence");
        }
        prop_assert_eq!(out.first(), slice.first());
    }

    #[test]
    fn mret2_intersection_is_in_both_passes(a in prop::collection::btree_set(0u64..30, 1..15), b in prop::collection::btree_set(0u64..30, 1..15)) {
        let entry = 100;
        let rec = |s: &BTreeSet<u64>| RegionRecording::from_items(std::iter::once(entry).chain(s.iter().copied()).map(item).collect());
        let (p1, p2) = (rec(&a), rec(&b));
        let out: BTreeSet<u64> = mret2_intersect(&p1, &p2).unwrap().addresses().collect();
        let s1: BTreeSet<u64> = p1.addresses().collect();
        let s2: BTreeSet<u64> = p2.addresses().collect();
        prop_assert!(out.is_subset(&s1) && out.is_subset(&s2));
        prop_assert_eq!(out, &s1 & &s2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn sweep_matches_isolated_runs(trace in walk_trace(20, 1500), rfts in prop::collection::vec(arb_rft(), 1..6), threads in 1usize..5) {
        let configs: Vec<_> = rfts.into_iter().map(SimulationConfig::new).collect();
        let swept = run_sweep(&trace, &configs, threads);
        for (c, r) in configs.iter().zip(swept) {
            let alone = run_simulation(&trace, c).unwrap();
            prop_assert_eq!(r.unwrap().report, alone.report);
        }
    }
}
