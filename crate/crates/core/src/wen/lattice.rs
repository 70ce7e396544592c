//! Exact integer linear algebra for small symmetric matrices.

/// Determinant by fraction-free (Bareiss) elimination.
pub fn det_bareiss(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn minor(m: &[Vec<i64>], skip_row: usize, skip_col: usize) -> Vec<Vec<i64>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != skip_row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != skip_col).map(|(_, &x)| x).collect())
        .collect()
}

/// Adjugate (transposed cofactor matrix): `K · adj(K) = det(K) · I`.
pub fn adjugate(m: &[Vec<i64>]) -> Vec<Vec<i128>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j][i] = sign * det_bareiss(&minor(m, i, j));
        }
    }
    adj
}

/// Sylvester's criterion for a symmetric integer matrix.
pub fn is_positive_definite(m: &[Vec<i64>]) -> bool {
    (1..=m.len()).all(|k| {
        let lead: Vec<Vec<i64>> = m[..k].iter().map(|r| r[..k].to_vec()).collect();
        det_bareiss(&lead) > 0
    })
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smith normal form `U·K·V = diag(d_1, …, d_g)` with `d_i | d_{i+1}`.
///
/// Only the column transform `V` is kept: it is all that is needed to
/// parametrize `K⁻¹ℤ^g / ℤ^g` as `V·D⁻¹·w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smith {
    pub diag: Vec<i64>,
    pub v: Vec<Vec<i64>>,
}

pub fn smith_normal_form(m: &[Vec<i64>]) -> Smith {
    let n = m.len();
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut v: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();

    let swap_cols = |a: &mut Vec<Vec<i128>>, v: &mut Vec<Vec<i128>>, p: usize, q: usize| {
        for row in a.iter_mut().chain(v.iter_mut()) {
            row.swap(p, q);
        }
    };
    // col_j -= q · col_t
    let sub_col = |a: &mut Vec<Vec<i128>>, v: &mut Vec<Vec<i128>>, j: usize, t: usize, q: i128| {
        for row in a.iter_mut().chain(v.iter_mut()) {
            row[j] -= q * row[t];
        }
    };

    for t in 0..n {
        loop {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            a.swap(t, pi);
            swap_cols(&mut a, &mut v, t, pj);

            let mut clean = true;
            for i in t + 1..n {
                let q = a[i][t].div_euclid(a[t][t]);
                if q != 0 {
                    let pivot_row = a[t].clone();
                    for (x, p) in a[i].iter_mut().zip(&pivot_row) {
                        *x -= q * p;
                    }
                }
                clean &= a[i][t] == 0;
            }
            for j in t + 1..n {
                let q = a[t][j].div_euclid(a[t][t]);
                if q != 0 {
                    sub_col(&mut a, &mut v, j, t, q);
                }
                clean &= a[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // Divisibility: fold an offending row into the pivot row.
            let p = a[t][t];
            let offending = (t + 1..n).find(|&i| (t + 1..n).any(|j| a[i][j] % p != 0));
            match offending {
                Some(i) => {
                    let row = a[i].clone();
                    for (x, r) in a[t].iter_mut().zip(&row) {
                        *x += r;
                    }
                }
                None => break,
            }
        }
        if a[t][t] < 0 {
            for row in a.iter_mut().chain(v.iter_mut()) {
                row[t] = -row[t];
            }
        }
    }
    Smith {
        diag: (0..n).map(|i| a[i][i] as i64).collect(),
        v: v.into_iter().map(|r| r.into_iter().map(|x| x as i64).collect()).collect(),
    }
}

pub fn mat_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n).map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_determinants() {
        assert_eq!(det_bareiss(&[vec![3]]), 3);
        assert_eq!(det_bareiss(&[vec![2, 1], vec![1, 2]]), 3);
        assert_eq!(det_bareiss(&[vec![0, 1], vec![1, 0]]), -1);
        assert_eq!(det_bareiss(&[vec![2, 1, 1], vec![1, 2, 1], vec![1, 1, 2]]), 4);
        assert_eq!(det_bareiss(&[vec![1, 2], vec![2, 4]]), 0);
    }

    #[test]
    fn adjugate_identity() {
        let k = vec![vec![3, 1, 0], vec![1, 3, 1], vec![0, 1, 3]];
        let adj = adjugate(&k);
        let det = det_bareiss(&k);
        for i in 0..3 {
            for j in 0..3 {
                let s: i128 = (0..3).map(|l| k[i][l] as i128 * adj[l][j]).sum();
                assert_eq!(s, if i == j { det } else { 0 });
            }
        }
    }

    #[test]
    fn sylvester() {
        assert!(is_positive_definite(&[vec![2, 1], vec![1, 2]]));
        assert!(!is_positive_definite(&[vec![1, 2], vec![2, 1]]));
        assert!(!is_positive_definite(&[vec![0]]));
    }

    #[test]
    fn smith_examples() {
        assert_eq!(smith_normal_form(&[vec![2, 1], vec![1, 2]]).diag, vec![1, 3]);
        assert_eq!(smith_normal_form(&[vec![2, 0], vec![0, 2]]).diag, vec![2, 2]);
        assert_eq!(smith_normal_form(&[vec![2, 0], vec![0, 3]]).diag, vec![1, 6]);
        assert_eq!(smith_normal_form(&[vec![3, 1, 1], vec![1, 3, 1], vec![1, 1, 3]]).diag, vec![1, 2, 10]);
    }

    fn small_symmetric() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..=4).prop_flat_map(|g| {
            proptest::collection::vec(-6i64..=6, g * g).prop_map(move |e| {
                let mut m = vec![vec![0; g]; g];
                for i in 0..g {
                    for j in 0..g {
                        m[i][j] = if i <= j { e[i * g + j] } else { e[j * g + i] };
                    }
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn smith_diagonal_divides_and_multiplies_to_det(m in small_symmetric()) {
            prop_assume!(det_bareiss(&m) != 0);
            let s = smith_normal_form(&m);
            let prod: i128 = s.diag.iter().map(|&d| d as i128).product();
            prop_assert_eq!(prod, det_bareiss(&m).abs());
            for w in s.diag.windows(2) {
                prop_assert!(w[0] > 0 && w[1] % w[0] == 0);
            }
            // K·V has columns d_j · (U⁻¹ e_j); so det(V) = ±1.
            prop_assert_eq!(det_bareiss(&s.v).abs(), 1);
        }

        #[test]
        fn bareiss_matches_cofactor_expansion(m in small_symmetric()) {
            let n = m.len();
            let expansion: i128 = if n == 1 {
                m[0][0] as i128
            } else {
                (0..n).map(|j| {
                    let s = if j % 2 == 0 { 1 } else { -1 };
                    s * m[0][j] as i128 * det_bareiss(&minor(&m, 0, j))
                }).sum()
            };
            prop_assert_eq!(det_bareiss(&m), expansion);
        }
    }
}
