//! Oracles shared by the integration tests.

use std::collections::BTreeSet;

/// Every simplex of the reflected standard triangulation of `[-K, K]^n`,
/// filtered to those with exactly `n` vertices of max-norm `K`, keeping
/// those `n` vertices.
pub fn filtered_boundary_faces(n: usize, k: i64) -> BTreeSet<Vec<Vec<i64>>> {
    let mut faces = BTreeSet::new();
    let perms = permutations(n);
    let mut z = vec![0i64; n];
    loop {
        for perm in &perms {
            let mut path = vec![z.clone()];
            let mut cur = z.clone();
            for &p in perm {
                cur[p] += 1;
                path.push(cur.clone());
            }
            for signs in 0..(1u32 << n) {
                let reflected: Vec<Vec<i64>> = path
                    .iter()
                    .map(|v| {
                        v.iter()
                            .enumerate()
                            .map(|(i, &c)| if signs >> i & 1 == 1 { -c } else { c })
                            .collect()
                    })
                    .collect();
                let mut outer: Vec<Vec<i64>> = reflected
                    .into_iter()
                    .filter(|v| v.iter().map(|c| c.abs()).max() == Some(k))
                    .collect();
                if outer.len() == n {
                    outer.sort();
                    faces.insert(outer);
                }
            }
        }
        // next lower corner in [0, K-1]^n
        let mut i = 0;
        loop {
            if i == n {
                return faces;
            }
            z[i] += 1;
            if z[i] < k {
                break;
            }
            z[i] = 0;
            i += 1;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}
