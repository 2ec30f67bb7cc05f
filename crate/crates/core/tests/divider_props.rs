use pllforge::divider::{div_step, divider_power_estimate, DividerState, PowerTable};
use proptest::prelude::*;

/// Seeded edge-train source, so a failing 10⁶-edge case shrinks to a seed.
struct Lcg(u64);

impl Lcg {
    /// True with probability `percent`/100.
    fn next_bool(&mut self, percent: u64) -> bool {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 33) % 100 < percent
    }
}

/// Input edge indices (1-based) at which the divider output rises.
fn rises(n: u32, steps: impl Iterator<Item = bool>) -> (Vec<u64>, u64) {
    let mut st = DividerState::new();
    let mut out = Vec::new();
    let mut edges = 0u64;
    for e in steps {
        if e {
            edges += 1;
        }
        let (s, rose) = div_step(st, e, n);
        st = s;
        if rose {
            out.push(edges);
        }
    }
    (out, edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exact_division_over_a_million_edges(
        n_pow in 1u32..=4,
        seed in any::<u64>(),
        density in 5u64..95,
    ) {
        let n = 1u32 << n_pow;
        let mut rng = Lcg(seed);
        let mut edges = 0u64;
        let train = std::iter::from_fn(|| {
            if edges >= 1_000_000 {
                return None;
            }
            let e = rng.next_bool(density);
            edges += e as u64;
            Some(e)
        });
        let (out, total) = rises(n, train);
        prop_assert_eq!(total, 1_000_000);
        prop_assert_eq!(out.len() as u64, total / n as u64);
        for (k, &edge) in out.iter().enumerate() {
            prop_assert_eq!(edge, k as u64 * n as u64 + 1);
        }
    }

    #[test]
    fn sixteen_equals_four_cascaded_halvers(seed in any::<u64>(), len in 1000usize..20000) {
        let mut rng = Lcg(seed);
        let train: Vec<bool> = (0..len).map(|_| rng.next_bool(50)).collect();
        let mut mono = DividerState::new();
        let mut chain = [DividerState::new(); 4];
        for &e in &train {
            let (m, m_rose) = div_step(mono, e, 16);
            mono = m;
            let mut edge = e;
            for stage in chain.iter_mut() {
                let (s, rose) = div_step(*stage, edge, 2);
                *stage = s;
                edge = rose;
            }
            prop_assert_eq!(m_rose, edge);
            prop_assert_eq!(mono.level, chain[3].level);
        }
    }
}

#[test]
fn power_table_rows_reproduced() {
    let table = PowerTable::tspc_divide_by_2();
    let rows = [
        (1e6, 0.24e-6),
        (10e6, 2.3e-6),
        (100e6, 9.022e-6),
        (1e9, 94.27e-6),
        (2e9, 188.8e-6),
        (3e9, 362.1e-6),
    ];
    assert_eq!(table.rows(), &rows);
    for (f, p) in rows {
        assert_eq!(table.stage_power(f), p);
        assert_eq!(divider_power_estimate(f, 2, &table).unwrap(), p);
    }
}
