//! Fit initialization: affine-invariant distances between observations,
//! agglomerative partitioning, and parameter seeding from a hard partition.
//! The distance matrix is the expensive part (n² eigendecompositions), so it
//! is computed once and shared across every cluster count under evaluation.

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::eigen::{sym_eigen, sym_eigenvalues};
use crate::linalg::{Matrix, SpdMatrix};
use crate::scalar::Scalar;
use crate::wishart::WishartComponent;

use super::{solve_dof_clamped, MixtureParams};

/// Affine-invariant distance ‖log(A^{-1/2} B A^{-1/2})‖_F, evaluated from
/// the eigenvalues of the whitened matrix: sqrt(Σ_i ln²μ_i).
pub fn riemannian_distance<F: Scalar>(a: &SpdMatrix<F>, b: &SpdMatrix<F>) -> Result<F> {
    if a.dim() != b.dim() {
        return Err(Error::dim("distance operand dims", a.dim(), b.dim()));
    }
    if !a.is_positive_definite() || !b.is_positive_definite() {
        return Err(Error::not_pd("riemannian distance needs PD operands"));
    }
    let p = a.dim();
    let ea = sym_eigen(&a.to_matrix())?;
    let mut inv_sqrt = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let mut s = F::zero();
            for (t, &lv) in ea.values.iter().enumerate() {
                if !(lv > F::zero()) {
                    return Err(Error::not_pd(format!(
                        "eigenvalue {} blocks the inverse square root",
                        lv.as_f64()
                    )));
                }
                s = s + ea.vectors[(i, t)] * ea.vectors[(j, t)] / lv.sqrt();
            }
            inv_sqrt[(i, j)] = s;
            inv_sqrt[(j, i)] = s;
        }
    }
    let whitened = inv_sqrt.matmul(&b.to_matrix())?.matmul(&inv_sqrt)?;
    let half = F::of(0.5);
    let sym = Matrix::from_fn(p, p, |i, j| (whitened[(i, j)] + whitened[(j, i)]) * half);
    let mut acc = F::zero();
    for mu in sym_eigenvalues(&sym)? {
        if !(mu > F::zero()) {
            return Err(Error::not_pd(format!(
                "whitened eigenvalue {} is not positive",
                mu.as_f64()
            )));
        }
        let l = mu.ln();
        acc = acc + l * l;
    }
    Ok(acc.sqrt())
}

/// Full n x n distance matrix; pairs are independent, so they run in
/// parallel, and the output order is fixed regardless of thread count.
pub fn distance_matrix<F: Scalar>(data: &Dataset<F>) -> Result<Matrix<F>> {
    let n = data.n();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| riemannian_distance(data.mat(i), data.mat(j)))
        .collect::<Result<Vec<F>>>()?;
    let mut out = Matrix::zeros(n, n);
    for (&(i, j), &d) in pairs.iter().zip(&values) {
        out[(i, j)] = d;
        out[(j, i)] = d;
    }
    Ok(out)
}

/// Cuts a Ward-linkage merge tree at k clusters. Works on squared
/// distances with the Lance-Williams recurrence
///
/// ```text
/// d²(i∪j, l) = [(nᵢ+nₗ)d²(i,l) + (nⱼ+nₗ)d²(j,l) − nₗ d²(i,j)] / (nᵢ+nⱼ+nₗ)
/// ```
///
/// merging the closest pair each round (ties to the lexicographically
/// smallest pair). Final labels are ranked by each cluster's smallest
/// member index, so the labeling depends only on the partition.
pub fn partition_from_distances<F: Scalar>(dist: &Matrix<F>, k: usize) -> Result<Vec<usize>> {
    let n = dist.rows();
    if dist.cols() != n {
        return Err(Error::dim("distance matrix columns", n, dist.cols()));
    }
    if k == 0 || k > n {
        return Err(Error::TooFewObservations { n, k });
    }
    let mut d2 = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let d = dist[(i, j)];
            d2[i * n + j] = d * d;
        }
    }
    let mut alive = vec![true; n];
    let mut size = vec![1usize; n];
    // For a dead slot, the slot it was merged into; chains resolve to a
    // surviving cluster.
    let mut merged_into: Vec<usize> = (0..n).collect();
    let mut clusters = n;
    while clusters > k {
        let mut bi = usize::MAX;
        let mut bj = usize::MAX;
        let mut best = F::infinity();
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if alive[j] && d2[i * n + j] < best {
                    best = d2[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        let (ni, nj) = (F::of(size[bi] as f64), F::of(size[bj] as f64));
        let dij = d2[bi * n + bj];
        for l in 0..n {
            if !alive[l] || l == bi || l == bj {
                continue;
            }
            let nl = F::of(size[l] as f64);
            let merged = ((ni + nl) * d2[bi * n + l] + (nj + nl) * d2[bj * n + l]
                - nl * dij)
                / (ni + nj + nl);
            d2[bi * n + l] = merged;
            d2[l * n + bi] = merged;
        }
        size[bi] += size[bj];
        alive[bj] = false;
        merged_into[bj] = bi;
        clusters -= 1;
    }
    // Resolve each observation to its surviving cluster slot.
    let mut slot = vec![0usize; n];
    for i in 0..n {
        let mut s = i;
        while !alive[s] {
            s = merged_into[s];
        }
        slot[i] = s;
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    order.sort_by_key(|&s| {
        (0..n)
            .find(|&i| slot[i] == s)
            .expect("alive cluster with no members")
    });
    let label_of = |s: usize| order.iter().position(|&o| o == s).unwrap();
    Ok(slot.iter().map(|&s| label_of(s)).collect())
}

/// Distance computation plus Ward cut in one call.
pub fn initialize_partition<F: Scalar>(data: &Dataset<F>, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > data.n() {
        return Err(Error::TooFewObservations { n: data.n(), k });
    }
    let dist = distance_matrix(data)?;
    partition_from_distances(&dist, k)
}

/// Seeds mixture parameters from a hard partition: cluster-share mixing
/// weights, scale = cluster mean divided by the starting dof ν₀ = p + 2,
/// then one dof-equation pass to refine each ν away from ν₀.
pub fn params_from_partition<F: Scalar>(
    data: &Dataset<F>,
    labels: &[usize],
    k: usize,
    nu_max: F,
) -> Result<MixtureParams<F>> {
    let n = data.n();
    let p = data.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::domain(format!(
            "label {bad} outside the {k} requested clusters"
        )));
    }
    let nu0 = F::of((p + 2) as f64);
    let mut tau = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            return Err(Error::EmptyComponent {
                component: c,
                soft_count: 0.0,
            });
        }
        let nc = F::of(members.len() as f64);
        let mut buf = vec![F::zero(); p * p];
        for &i in &members {
            for (acc, &v) in buf.iter_mut().zip(data.mat(i).data()) {
                *acc = *acc + v;
            }
        }
        let denom = nc * nu0;
        for v in &mut buf {
            *v = *v / denom;
        }
        let sigma = SpdMatrix::from_symmetric_unchecked(p, buf);
        if !sigma.is_positive_definite() {
            return Err(Error::not_pd(format!(
                "cluster {c} average is numerically singular"
            )));
        }
        let wls = members
            .iter()
            .map(|&i| data.log_det(i))
            .fold(F::zero(), |a, v| a + v);
        let nu = solve_dof_clamped(wls, nc, p, sigma.log_det()?, nu_max)?;
        tau.push(nc / F::of(n as f64));
        components.push(WishartComponent::new(sigma, nu)?);
    }
    MixtureParams::new(tau, components)
}

/// Deterministic partition nudge used when a fit collapses a component:
/// the smallest cluster absorbs its nearest outside observations (up to
/// n/(4k), at least one), never emptying a donor.
pub fn grow_smallest_cluster<F: Scalar>(
    dist: &Matrix<F>,
    labels: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    let n = labels.len();
    if dist.rows() != n {
        return Err(Error::dim("distance matrix rows", n, dist.rows()));
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let target = (0..k).min_by_key(|&c| (sizes[c], c)).expect("k >= 1");
    let members: Vec<usize> = (0..n).filter(|&i| labels[i] == target).collect();
    if members.is_empty() {
        return Err(Error::domain("cannot grow an empty cluster"));
    }
    let mut candidates: Vec<(usize, F)> = (0..n)
        .filter(|&i| labels[i] != target)
        .map(|i| {
            let dmin = members
                .iter()
                .map(|&m| dist[(i, m)])
                .fold(F::infinity(), |a, d| a.min(d));
            (i, dmin)
        })
        .collect();
    candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let quota = (n / (4 * k)).max(1);
    let mut out = labels.to_vec();
    let mut moved = 0;
    for (i, _) in candidates {
        if moved == quota {
            break;
        }
        if sizes[out[i]] > 1 {
            sizes[out[i]] -= 1;
            sizes[target] += 1;
            out[i] = target;
            moved += 1;
        }
    }
    Ok(out)
}

/// Random partition jitter for restarts: each observation moves to a
/// uniformly random cluster with probability 0.2. Retries a few times if
/// the jitter empties a cluster; the last attempt is returned regardless
/// and parameter seeding reports the failure.
pub fn shuffle_partition<R: Rng + ?Sized>(labels: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let mut out = labels.to_vec();
    for _ in 0..20 {
        out = labels.to_vec();
        for l in out.iter_mut() {
            if rng.gen::<f64>() < 0.2 {
                *l = rng.gen_range(0..k);
            }
        }
        let mut seen = vec![false; k];
        for &l in &out {
            seen[l] = true;
        }
        if seen.iter().all(|&s| s) {
            break;
        }
    }
    out
}
