use fxlstm::config::{AluResource, WeightResource};
use fxlstm::perf_model::{
    count_ops, estimate_resources, perf, reference, schedule_cycles, PerfReport,
};
use fxlstm::{EngineKind, MetaParams};
use proptest::prelude::*;

fn meta(k: usize, m: usize, seq_len: usize) -> MetaParams {
    MetaParams {
        hidden_size: k,
        in_features: k,
        input_size: m,
        seq_len,
        ..MetaParams::default()
    }
}

#[test]
fn op_count_by_hand() {
    // seq_len * (8K(K+M+1) + 4K + 6K + K) + 2P(K+1)
    for (k, m, p, n) in [
        (1u64, 1u64, 1u64, 1u64),
        (20, 1, 1, 6),
        (7, 3, 2, 4),
        (200, 10, 5, 9),
    ] {
        let want = n * (8 * k * (k + m + 1) + 11 * k) + 2 * p * (k + 1);
        assert_eq!(
            count_ops(k as usize, m as usize, p as usize, n as usize).unwrap(),
            want
        );
    }
}

proptest! {
    #[test]
    fn ops_and_cycles_grow_with_size(k in 1usize..199, m in 1usize..10, n in 1usize..20) {
        let a = meta(k, m, n);
        let ops = |md: &MetaParams| count_ops(md.hidden_size, md.input_size, md.out_features, md.seq_len).unwrap();
        let cyc = |md: &MetaParams| schedule_cycles(md, md.engine, md.num_parallel_alus, md.seq_len).unwrap().total;
        for b in [meta(k + 1, m, n), meta(k, m + 1, n), meta(k, m, n + 1)] {
            prop_assert!(ops(&b) > ops(&a));
            prop_assert!(cyc(&b) > cyc(&a));
        }
    }

    #[test]
    fn more_alus_never_slow_down(k in 1usize..100, alus in 1usize..8) {
        let md = meta(k, 1, 3);
        let a = schedule_cycles(&md, EngineKind::Pipelined, alus, 3).unwrap().total;
        let b = schedule_cycles(&md, EngineKind::Pipelined, alus + 1, 3).unwrap().total;
        prop_assert!(b <= a);
    }

    #[test]
    fn efficiency_identity(ops in 1.0f64..1e9, cycles in 1.0f64..1e7, clock in 1e6f64..1e9, power in 1e-3f64..10.0) {
        let r = PerfReport::from_counts(ops, cycles, clock, power).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs() < 1e-12;
        prop_assert!(rel(r.efficiency_gops_per_w * power, r.throughput_gops));
        prop_assert!(rel(r.throughput_gops * r.latency_s * 1e9, ops));
        prop_assert!(rel(r.energy_uj, power * cycles / clock * 1e6));
    }

    #[test]
    fn dsp_count_is_independent_of_hidden_size(k in 1usize..200) {
        let a = estimate_resources(&meta(k, 1, 6)).unwrap();
        prop_assert_eq!(a.dsp_used, 8);
        let lut = MetaParams { alu_resource_type: AluResource::Lut, ..meta(k, 1, 6) };
        prop_assert_eq!(estimate_resources(&lut).unwrap().dsp_used, 0);
    }

    #[test]
    fn resources_do_not_shrink_with_hidden_size(
        k in 1usize..199,
        alu in prop::sample::select(vec![AluResource::Dsp, AluResource::Lut]),
        store in prop::sample::select(vec![WeightResource::Lutram, WeightResource::Bram, WeightResource::Auto]),
    ) {
        let at = |k| {
            estimate_resources(&MetaParams { alu_resource_type: alu, weight_resource_type: store, ..meta(k, 1, 6) })
                .unwrap()
        };
        let (a, b) = (at(k), at(k + 1));
        prop_assert!(b.weight_bits > a.weight_bits);
        prop_assert!(b.lut_used + b.bram_18k_used >= a.lut_used + a.bram_18k_used);
    }
}

#[test]
fn default_deployment_perf_is_consistent() {
    let md = MetaParams::default();
    let r = perf(&md).unwrap();
    assert_eq!(r.ops_per_inference, 22482.0);
    assert!(r.cycles > 0.0);
    assert!((r.latency_s - r.cycles / 204e6).abs() < 1e-15);
}

#[test]
fn reference_checks_hold() {
    for c in reference::checks().unwrap() {
        if let Some(pass) = c.pass {
            assert!(pass, "{}: {} vs {}", c.name, c.computed, c.expected);
        }
    }
}
