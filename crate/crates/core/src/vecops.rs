//! Small dense-vector helpers on slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn unit_vector(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// Orthonormal basis of the orthogonal complement of `v` (which need not be unit).
pub fn orthonormal_complement(v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    let n = norm2(v);
    let u: Vec<f64> = v.iter().map(|x| x / n).collect();
    let mut basis: Vec<Vec<f64>> = vec![u];
    for i in 0..d {
        if basis.len() == d {
            break;
        }
        let mut e = unit_vector(d, i);
        for b in &basis {
            let c = dot(&e, b);
            for (ek, bk) in e.iter_mut().zip(b) {
                *ek -= c * bk;
            }
        }
        let len = norm2(&e);
        if len > 1e-8 {
            basis.push(e.iter().map(|x| x / len).collect());
        }
    }
    basis.remove(0);
    basis
}
