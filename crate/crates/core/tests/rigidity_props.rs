use kempe_core::framework::{rigidity_report, Framework, JointId};
use kempe_core::geom::Vec2;
use num::{BigRational, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact rank by Gaussian elimination over the rationals.
fn exact_rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let f = &m[r][c] / &m[rank][c];
                for k in c..cols {
                    let d = &f * &m[rank][k];
                    m[r][k] -= d;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rigidity matrix of all joints (pins ignored) at integer positions.
fn full_rank(pos: &[(i64, i64)], bars: &[(usize, usize)]) -> usize {
    let q = |v: i64| BigRational::from_integer(v.into());
    let rows = bars
        .iter()
        .map(|&(a, b)| {
            let mut row = vec![BigRational::zero(); 2 * pos.len()];
            let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
            row[2 * a] = q(dx);
            row[2 * a + 1] = q(dy);
            row[2 * b] = q(-dx);
            row[2 * b + 1] = q(-dy);
            row
        })
        .collect();
    exact_rank(rows)
}

fn random_framework(rng: &mut impl Rng) -> (Vec<(i64, i64)>, Vec<(usize, usize)>) {
    let n = rng.gen_range(4..8);
    let mut pos: Vec<(i64, i64)> = Vec::new();
    while pos.len() < n {
        let p = (rng.gen_range(-6..=6), rng.gen_range(-6..=6));
        if !pos.contains(&p) {
            pos.push(p);
        }
    }
    let mut bars = vec![(0, 1)];
    for a in 0..n {
        for b in a + 1..n {
            if (a, b) != (0, 1) && rng.gen_bool(0.45) {
                bars.push((a, b));
            }
        }
    }
    (pos, bars)
}

fn build(pos: &[Vec2], bars: &[(usize, usize)]) -> Framework {
    let mut fw = Framework::new();
    for (i, p) in pos.iter().enumerate() {
        fw.add_joint(*p, i < 2);
    }
    for &(a, b) in bars {
        fw.add_bar(JointId(a), JointId(b));
    }
    fw
}

fn as_vec(pos: &[(i64, i64)]) -> Vec<Vec2> {
    pos.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect()
}

#[test]
fn pinned_dof_matches_elimination_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let (pos, bars) = random_framework(&mut rng);
        let fw = build(&as_vec(&pos), &bars);
        let rep = rigidity_report(&fw, &fw.home_placement()).unwrap();
        // The pinned pair shares a bar, so pinning removes exactly the three
        // trivial motions from the unpinned flex space.
        let expected = 2 * pos.len() - full_rank(&pos, &bars) - 3;
        assert_eq!(rep.dof, expected, "positions {pos:?} bars {bars:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dof_invariant_under_rigid_motion(seed in any::<u64>(), angle in -3.1f64..3.1, tx in -50.0f64..50.0, ty in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pos, bars) = random_framework(&mut rng);
        let home = as_vec(&pos);
        let moved: Vec<Vec2> = home.iter().map(|p| p.rotate(angle) + Vec2::new(tx, ty)).collect();
        let a = rigidity_report(&build(&home, &bars), &home).unwrap();
        let b = rigidity_report(&build(&moved, &bars), &moved).unwrap();
        prop_assert_eq!(a.dof, b.dof);
        prop_assert_eq!(a.dof, 2 * pos.len() - full_rank(&pos, &bars) - 3);
    }
}

#[test]
fn oracle_sanity() {
    // Triangle: rank 3; square without diagonal: rank 4.
    assert_eq!(full_rank(&[(0, 0), (1, 0), (0, 1)], &[(0, 1), (1, 2), (2, 0)]), 3);
    assert_eq!(full_rank(&[(0, 0), (1, 0), (1, 1), (0, 1)], &[(0, 1), (1, 2), (2, 3), (3, 0)]), 4);
}
