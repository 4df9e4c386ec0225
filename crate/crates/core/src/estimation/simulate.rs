//! Seeded simulation of clustered Gaussian data.
//!
//! Cluster `i` draws only from substream `i` of the master seed, so the output
//! is identical whatever the thread count or scheduling order.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::equivalence::{joint_cov, ExtendedSpec};
use crate::io::fmt_f64;
use crate::linalg::MAX_DIM;
use crate::model::{require_pd, CSParams, ClusterData, Dataset};
use crate::rng::Seed;
use crate::{Error, Result};

/// Design of the simulated clusters.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    InterceptOnly,
    /// One `nᵢ × p` design matrix per cluster.
    Matrices(Vec<DMatrix<f64>>),
}

/// Cluster sizes and design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLayout {
    sizes: Vec<usize>,
    design: Design,
}

impl SimLayout {
    pub fn balanced(n_clusters: usize, cluster_size: usize) -> Self {
        Self::with_sizes(vec![cluster_size; n_clusters])
            .expect("balanced layout needs positive sizes")
    }

    pub fn with_sizes(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Validation(
                "layout needs at least one cluster and sizes >= 1".into(),
            ));
        }
        Ok(Self {
            sizes,
            design: Design::InterceptOnly,
        })
    }

    pub fn with_design(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let sizes: Vec<usize> = matrices.iter().map(|m| m.nrows()).collect();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Validation(
                "layout needs at least one cluster and sizes >= 1".into(),
            ));
        }
        let p = matrices[0].ncols();
        if p == 0 || matrices.iter().any(|m| m.ncols() != p) {
            return Err(Error::Validation(
                "design matrices must share a positive column count".into(),
            ));
        }
        Ok(Self {
            sizes,
            design: Design::Matrices(matrices),
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    fn p(&self) -> usize {
        match &self.design {
            Design::InterceptOnly => 1,
            Design::Matrices(m) => m[0].ncols(),
        }
    }

    fn x(&self, i: usize) -> DMatrix<f64> {
        match &self.design {
            Design::InterceptOnly => DMatrix::from_element(self.sizes[i], 1, 1.0),
            Design::Matrices(m) => m[i].clone(),
        }
    }

    fn covariate_names(&self) -> Vec<String> {
        (1..=self.p()).map(|j| format!("x{j}")).collect()
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.p() {
            return Err(Error::Validation(format!(
                "xi has {} coefficients but the design has {} columns",
                xi.len(),
                self.p()
            )));
        }
        Ok(())
    }
}

fn normals(rng: &mut impl Rng, k: usize) -> DVector<f64> {
    DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws from the compound-symmetry model.
///
/// For `λ ≥ 0` each cluster gets a random intercept `b ~ N(0, λ)` plus
/// independent `N(0, φ)` errors. For `λ < 0` no such intercept exists and the
/// marginal `N(Xξ, λJ + φI)` is sampled through its symmetric square root
/// `√φ (I − J/n) + √(φ+nλ) J/n`.
pub fn simulate_cs(params: &CSParams, layout: &SimLayout, seed: Seed) -> Result<Dataset> {
    layout.check_xi(&params.xi)?;
    let sizes = layout.sizes.iter().copied().collect();
    require_pd(&sizes, params.lambda, params.phi)?;
    let xi = DVector::from_column_slice(&params.xi);
    let (lambda, phi) = (params.lambda, params.phi);

    let clusters = (0..layout.n_clusters())
        .into_par_iter()
        .map(|i| {
            let n = layout.sizes[i];
            let x = layout.x(i);
            let mut rng = seed.stream(i as u64);
            let noise = if lambda >= 0.0 {
                let b = lambda.sqrt() * rng.sample::<f64, _>(StandardNormal);
                normals(&mut rng, n) * phi.sqrt() + DVector::from_element(n, b)
            } else {
                let z = normals(&mut rng, n);
                let zbar = z.mean();
                let shift = ((phi + n as f64 * lambda).sqrt() - phi.sqrt()) * zbar;
                z * phi.sqrt() + DVector::from_element(n, shift)
            };
            let y = &x * &xi + noise;
            ClusterData::new(i.to_string(), y, x)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(clusters, layout.covariate_names())
}

/// Latent draws of one simulated cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub b: f64,
    pub eps: Vec<f64>,
}

/// Draws `(b, ε)` jointly from the correlated random-intercept member `spec`
/// and returns `Y = Xξ + b1 + ε` together with the latent values.
///
/// Boundary members (`|α| = 1`) have a singular joint covariance; the draw
/// uses an eigenvalue square root, which is well defined there. Cluster sizes
/// for which the joint covariance is indefinite (`nτ² > dσ²`) are rejected.
pub fn simulate_extended(
    spec: &ExtendedSpec,
    xi: &[f64],
    layout: &SimLayout,
    seed: Seed,
) -> Result<(Dataset, Vec<Latent>)> {
    layout.check_xi(xi)?;
    let mut factors = BTreeMap::new();
    for &n in &layout.sizes {
        if factors.contains_key(&n) {
            continue;
        }
        if n + 1 > MAX_DIM {
            return Err(Error::DimensionCap(n + 1));
        }
        if !spec.joint_is_psd(n) {
            return Err(Error::JointNotPsd {
                cluster_size: n,
                eigenvalue: spec.joint_min_eigenvalue(n),
            });
        }
        factors.insert(n, joint_cov(spec, n).psd_factor());
    }
    let xi = DVector::from_column_slice(xi);

    let drawn = (0..layout.n_clusters())
        .into_par_iter()
        .map(|i| {
            let n = layout.sizes[i];
            let x = layout.x(i);
            let mut rng = seed.stream(i as u64);
            let w = &factors[&n] * normals(&mut rng, n + 1);
            let b = w[0];
            let eps: Vec<f64> = w.iter().skip(1).copied().collect();
            let y = &x * &xi + DVector::from_iterator(n, eps.iter().map(|e| b + e));
            Ok((ClusterData::new(i.to_string(), y, x)?, Latent { b, eps }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (clusters, latent): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    Ok((Dataset::new(clusters, layout.covariate_names())?, latent))
}

/// Writes the latent sidecar `cluster,b,eps1,...,epsn`; shorter clusters leave
/// trailing fields empty.
pub fn write_latent<W: Write>(data: &Dataset, latent: &[Latent], mut w: W) -> std::io::Result<()> {
    let width = latent.iter().map(|l| l.eps.len()).max().unwrap_or(0);
    write!(w, "cluster,b")?;
    for j in 1..=width {
        write!(w, ",eps{j}")?;
    }
    writeln!(w)?;
    for (cl, l) in data.clusters().iter().zip(latent) {
        write!(w, "{},{}", cl.id, fmt_f64(l.b))?;
        for j in 0..width {
            match l.eps.get(j) {
                Some(e) => write!(w, ",{}", fmt_f64(*e))?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(data: &Dataset) -> (Vec<f64>, Vec<f64>) {
        data.clusters().iter().map(|c| (c.y[0], c.y[1])).unzip()
    }

    fn cov(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / (n - 1.0)
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()
    }

    #[test]
    fn independent_clusters_have_no_correlation() {
        let d = simulate_cs(
            &CSParams::new(vec![0.0], 0.0, 1.0),
            &SimLayout::balanced(2000, 2),
            Seed(1),
        )
        .unwrap();
        let (a, b) = pairs(&d);
        assert!(corr(&a, &b).abs() < 0.05);
    }

    #[test]
    fn positive_lambda_covariance() {
        let d = simulate_cs(
            &CSParams::new(vec![0.0], 2.0, 1.0),
            &SimLayout::balanced(5000, 2),
            Seed(2),
        )
        .unwrap();
        let (a, b) = pairs(&d);
        assert!((cov(&a, &a) - 3.0).abs() < 0.15);
        assert!((cov(&b, &b) - 3.0).abs() < 0.15);
        assert!((cov(&a, &b) - 2.0).abs() < 0.15);
    }

    #[test]
    fn negative_lambda_correlation() {
        let d = simulate_cs(
            &CSParams::new(vec![0.0], -0.4, 1.0),
            &SimLayout::balanced(5000, 2),
            Seed(3),
        )
        .unwrap();
        let (a, b) = pairs(&d);
        assert!((corr(&a, &b) + 2.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn invalid_params_rejected() {
        let r = simulate_cs(
            &CSParams::new(vec![0.0], -0.6, 1.0),
            &SimLayout::balanced(10, 2),
            Seed(3),
        );
        assert!(matches!(
            r,
            Err(Error::NotPositiveDefinite {
                cluster_size: 2,
                ..
            })
        ));
        let r = simulate_cs(
            &CSParams::new(vec![0.0, 1.0], 0.6, 1.0),
            &SimLayout::balanced(10, 2),
            Seed(3),
        );
        assert!(r.is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = CSParams::new(vec![1.5], -0.1, 0.7);
        let layout = SimLayout::with_sizes((0..300).map(|i| 1 + i % 5).collect()).unwrap();
        let run = |t| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap();
            pool.install(|| simulate_cs(&p, &layout, Seed(77)).unwrap())
        };
        let (a, b) = (run(1), run(4));
        for (x, y) in a.clusters().iter().zip(b.clusters()) {
            let bits = |c: &ClusterData| c.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(x), bits(y));
        }
    }

    #[test]
    fn conventional_member_decouples_errors() {
        let alpha = ExtendedSpec::conventional_alpha(3.0, 1.0).unwrap();
        let spec = ExtendedSpec::new(3.0, 1.0, alpha).unwrap();
        let (_, lat) =
            simulate_extended(&spec, &[0.0], &SimLayout::balanced(2000, 2), Seed(4)).unwrap();
        let b: Vec<f64> = lat.iter().map(|l| l.b).collect();
        let e: Vec<f64> = lat.iter().map(|l| l.eps[0]).collect();
        assert!(corr(&b, &e).abs() < 0.05);
    }

    #[test]
    fn boundary_member_is_perfectly_correlated() {
        // α = 1 is jointly PSD only for single-observation clusters
        let spec = ExtendedSpec::new(2.0, 1.0, 1.0).unwrap();
        let (_, lat) =
            simulate_extended(&spec, &[0.0], &SimLayout::balanced(2000, 1), Seed(5)).unwrap();
        let b: Vec<f64> = lat.iter().map(|l| l.b).collect();
        let e: Vec<f64> = lat.iter().map(|l| l.eps[0]).collect();
        assert!(corr(&b, &e) < -0.99);

        let err =
            simulate_extended(&spec, &[0.0], &SimLayout::balanced(10, 2), Seed(5)).unwrap_err();
        match err {
            Error::JointNotPsd {
                cluster_size,
                eigenvalue,
            } => {
                assert_eq!(cluster_size, 2);
                assert!(eigenvalue < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extended_observations_are_b_plus_eps() {
        let spec = ExtendedSpec::new(2.0, 1.0, 0.0).unwrap();
        let (d, lat) =
            simulate_extended(&spec, &[1.5], &SimLayout::balanced(5, 2), Seed(6)).unwrap();
        for (c, l) in d.clusters().iter().zip(&lat) {
            for j in 0..2 {
                assert!((c.y[j] - (1.5 + l.b + l.eps[j])).abs() < 1e-14);
            }
        }
        let mut buf = Vec::new();
        write_latent(&d, &lat, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cluster,b,eps1,eps2\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
