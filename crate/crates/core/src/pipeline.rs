//! Encode points with one approximation method and estimate kernels between encodings.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::condense::{
    condense, condense_codes, memory_footprint, CondensedFeature, Footprint, FootprintParams,
    StorageMethod, WeightVector,
};
use crate::error::{Error, Result};
use crate::features::{rff_kernel_estimate, RffMap};
use crate::kernels::{
    condensed_estimate, gram_with, rbf_kernel, semiq_estimate, stocq_estimate, GramKind, GramMatrix,
};
use crate::quantize::{msq, stocq, Alphabet, NoiseShapingConfig, Scheme};
use crate::rng::{derive_seed, rng_from_seed, QrffRng};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// The kernel itself; encodings are the raw points.
    Exact,
    Rff,
    /// One-bit signs of the features.
    Universal,
    /// Full-precision features on one side, memoryless quantized on the other.
    SemiQ { alphabet: Alphabet },
    StocQ { alphabet: Alphabet },
    /// Condensed, unquantized features `Ṽz` using the weights of `config`.
    CondensedRff(NoiseShapingConfig),
    NoiseShaping(NoiseShapingConfig),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Exact => "exact".into(),
            Method::Rff => "rff".into(),
            Method::Universal => "universal".into(),
            Method::SemiQ { .. } => "semiq".into(),
            Method::StocQ { .. } => "stocq".into(),
            Method::CondensedRff(_) => "condensed_rff".into(),
            Method::NoiseShaping(config) => match config.scheme {
                Scheme::SigmaDelta { order, .. } => format!("sigma_delta_r{order}"),
                Scheme::SigmaDeltaRandomized => "sigma_delta_random".into(),
                Scheme::Beta { .. } => "beta".into(),
            },
        }
    }

    pub fn gram_kind(&self) -> GramKind {
        match self {
            Method::Exact => GramKind::Exact,
            Method::Rff => GramKind::Rff,
            Method::Universal => GramKind::Universal,
            Method::SemiQ { .. } => GramKind::SemiQ,
            Method::StocQ { .. } => GramKind::StocQ,
            Method::CondensedRff(_) => GramKind::CondensedRff,
            Method::NoiseShaping(config) => match config.scheme {
                Scheme::Beta { .. } => GramKind::Beta,
                _ => GramKind::SigmaDelta,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    Raw(Vec<f64>),
    /// Features, signs or stochastic codes, depending on the method.
    Dense(Vec<f64>),
    Semi { z: Vec<f64>, q: Vec<f64> },
    Condensed(CondensedFeature),
}

/// Which side of a linear model a feature row is used on; only SemiQ distinguishes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Query,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    map: RffMap,
    method: Method,
    weights: Option<WeightVector>,
}

impl Pipeline {
    pub fn new(map: RffMap, method: Method) -> Result<Self> {
        let weights = match &method {
            Method::CondensedRff(config) | Method::NoiseShaping(config) => {
                config.validate()?;
                if config.m() != map.m() {
                    return Err(Error::Incompatible(format!(
                        "map has m = {} but the quantizer expects λ·p = {}",
                        map.m(),
                        config.m()
                    )));
                }
                Some(WeightVector::for_config(config)?)
            }
            _ => None,
        };
        Ok(Pipeline { map, method, weights })
    }

    pub fn map(&self) -> &RffMap {
        &self.map
    }

    pub fn method(&self) -> &Method {
        &self.method
    }

    pub fn encode(&self, x: &[f64], rng: &mut QrffRng) -> Result<Encoding> {
        if let Method::Exact = self.method {
            crate::error::check_len(self.map.dim(), x.len())?;
            return Ok(Encoding::Raw(x.to_vec()));
        }
        let z = self.map.embed(x)?;
        Ok(match &self.method {
            Method::Exact => unreachable!(),
            Method::Rff => Encoding::Dense(z),
            Method::Universal => {
                Encoding::Dense(z.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect())
            }
            Method::SemiQ { alphabet } => {
                let q = msq(&z, alphabet);
                Encoding::Semi { z, q }
            }
            Method::StocQ { alphabet } => Encoding::Dense(stocq(&z, alphabet, rng)),
            Method::CondensedRff(config) => {
                let weights = self.weights.as_ref().expect("weights set for condensed methods");
                Encoding::Condensed(condense(&z, weights, config.p)?)
            }
            Method::NoiseShaping(config) => {
                let result = config.quantize(&z, rng)?;
                Encoding::Condensed(condense_codes(&result.q, config, result.prescale)?)
            }
        })
    }

    /// Encode every point with an independent rng derived from `seed` and the point index.
    pub fn encode_batch(&self, points: &[Vec<f64>], seed: u64) -> Result<Vec<Encoding>> {
        points
            .par_iter()
            .enumerate()
            .map(|(i, x)| self.encode(x, &mut rng_from_seed(derive_seed(seed, &[i as u64]))))
            .collect()
    }

    /// Kernel estimate between two encodings. For SemiQ the first argument
    /// supplies the full-precision side.
    pub fn estimate(&self, a: &Encoding, b: &Encoding) -> Result<f64> {
        match (&self.method, a, b) {
            (Method::Exact, Encoding::Raw(x), Encoding::Raw(y)) => {
                rbf_kernel(x, y, self.map.spec().gamma)
            }
            (Method::Rff, Encoding::Dense(x), Encoding::Dense(y)) => rff_kernel_estimate(x, y),
            (Method::Universal, Encoding::Dense(x), Encoding::Dense(y)) => {
                crate::error::check_len(x.len(), y.len())?;
                Ok(crate::features::dot(x, y) / x.len() as f64)
            }
            (Method::SemiQ { .. }, Encoding::Semi { z, .. }, Encoding::Semi { q, .. }) => {
                semiq_estimate(z, q)
            }
            (Method::StocQ { .. }, Encoding::Dense(x), Encoding::Dense(y)) => stocq_estimate(x, y),
            (
                Method::CondensedRff(_) | Method::NoiseShaping(_),
                Encoding::Condensed(x),
                Encoding::Condensed(y),
            ) => condensed_estimate(x, y),
            _ => Err(Error::Incompatible(format!(
                "encoding does not match method {}",
                self.method.label()
            ))),
        }
    }

    /// Symmetric approximate Gram matrix. SemiQ entries average both orders.
    pub fn gram(&self, encodings: &[Encoding]) -> Result<GramMatrix> {
        let kind = self.method.gram_kind();
        if let Method::Exact = self.method {
            return gram_with(encodings, kind, |a, b| self.estimate(a, b));
        }
        let train = self.feature_matrix(encodings, Role::Train)?;
        let product = if let Method::SemiQ { .. } = self.method {
            &train * self.feature_matrix(encodings, Role::Query)?.transpose()
        } else {
            &train * train.transpose()
        };
        Ok(GramMatrix {
            entries: (&product + product.transpose()) * 0.5,
            kind,
        })
    }

    /// Feature rows stacked into an `n × width` matrix.
    pub fn feature_matrix(&self, encodings: &[Encoding], role: Role) -> Result<DMatrix<f64>> {
        let rows = encodings
            .par_iter()
            .map(|e| self.feature_row(e, role))
            .collect::<Result<Vec<_>>>()?;
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch { expected: width, actual: bad.len() });
        }
        Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
    }

    /// Explicit feature row `φ` with `⟨φ_train(x), φ_query(y)⟩` equal to the estimate.
    /// Undefined for the exact kernel.
    pub fn feature_row(&self, encoding: &Encoding, role: Role) -> Result<Vec<f64>> {
        let m = self.map.m() as f64;
        match (&self.method, encoding) {
            (Method::Rff | Method::StocQ { .. }, Encoding::Dense(v)) => {
                let s = (2.0 / m).sqrt();
                Ok(v.iter().map(|x| x * s).collect())
            }
            (Method::Universal, Encoding::Dense(v)) => {
                let s = m.sqrt().recip();
                Ok(v.iter().map(|x| x * s).collect())
            }
            (Method::SemiQ { .. }, Encoding::Semi { z, q }) => {
                let s = (2.0 / m).sqrt();
                Ok(match role {
                    Role::Train => z.iter().map(|x| x * s).collect(),
                    Role::Query => {
                        let t = std::f64::consts::PI / (2.0 * m) / s;
                        q.iter().map(|x| x * t).collect()
                    }
                })
            }
            (Method::CondensedRff(_) | Method::NoiseShaping(_), Encoding::Condensed(c)) => {
                Ok(c.y.iter().map(|x| x / c.prescale).collect())
            }
            _ => Err(Error::Incompatible(format!(
                "no explicit features for method {}",
                self.method.label()
            ))),
        }
    }

    /// Bits needed to store one encoded point.
    pub fn footprint(&self) -> Result<Footprint> {
        let m = self.map.m();
        let (method, params) = match &self.method {
            Method::Exact => {
                return Err(Error::invalid("method", "the exact kernel has no feature footprint"))
            }
            Method::Rff | Method::CondensedRff(_) => (StorageMethod::Rff, FootprintParams::dense(m, 1)),
            Method::Universal => (StorageMethod::Universal, FootprintParams::dense(m, 1)),
            Method::SemiQ { alphabet } => {
                (StorageMethod::SemiQ, FootprintParams::dense(m, alphabet.bits()))
            }
            Method::StocQ { alphabet } => {
                (StorageMethod::StocQ, FootprintParams::dense(m, alphabet.bits()))
            }
            Method::NoiseShaping(config) => {
                let params = FootprintParams {
                    m,
                    bits: config.alphabet.bits(),
                    p: config.p,
                    lambda: config.lambda,
                    order: config.scheme.order(),
                    beta: match config.scheme {
                        Scheme::Beta { beta } => beta,
                        _ => 0.0,
                    },
                };
                let method = match config.scheme {
                    Scheme::Beta { .. } => StorageMethod::Beta,
                    _ => StorageMethod::SigmaDelta,
                };
                (method, params)
            }
        };
        memory_footprint(method, &params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::KernelSpec;

    fn map(m: usize) -> RffMap {
        RffMap::sample(KernelSpec::rbf(0.5, 2).unwrap(), m, 9).unwrap()
    }

    fn methods(m: usize) -> Vec<Method> {
        let a1 = Alphabet::from_bits(1).unwrap();
        let a2 = Alphabet::from_bits(2).unwrap();
        vec![
            Method::Exact,
            Method::Rff,
            Method::Universal,
            Method::SemiQ { alphabet: a2.clone() },
            Method::StocQ { alphabet: a2.clone() },
            Method::CondensedRff(NoiseShapingConfig::new(Scheme::sigma_delta(1), 4, m / 4, a1.clone()).unwrap()),
            Method::NoiseShaping(NoiseShapingConfig::new(Scheme::sigma_delta(1), 4, m / 4, a1).unwrap()),
            Method::NoiseShaping(NoiseShapingConfig::new(Scheme::Beta { beta: 1.5 }, 4, m / 4, a2).unwrap()),
        ]
    }

    #[test]
    fn feature_rows_reproduce_estimates() {
        let pts = vec![vec![0.1, 0.2], vec![-0.4, 0.9]];
        for method in methods(64).into_iter().skip(1) {
            let p = Pipeline::new(map(64), method.clone()).unwrap();
            let enc = p.encode_batch(&pts, 3).unwrap();
            let est = p.estimate(&enc[0], &enc[1]).unwrap();
            let a = p.feature_row(&enc[0], Role::Train).unwrap();
            let b = p.feature_row(&enc[1], Role::Query).unwrap();
            let inner: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((inner - est).abs() < 1e-12, "{}", method.label());
        }
    }

    #[test]
    fn grams_are_symmetric() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.1, 1.0 - i as f64 * 0.2]).collect();
        for method in methods(64) {
            let p = Pipeline::new(map(64), method).unwrap();
            let enc = p.encode_batch(&pts, 1).unwrap();
            let g = p.gram(&enc).unwrap();
            assert_eq!(g.entries, g.entries.transpose());
            for i in 0..6 {
                for j in 0..6 {
                    let direct = 0.5 * (p.estimate(&enc[i], &enc[j]).unwrap() + p.estimate(&enc[j], &enc[i]).unwrap());
                    assert!((g.entries[(i, j)] - direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn batch_encoding_is_deterministic() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64)]).collect();
        let p = Pipeline::new(map(32), methods(32)[4].clone()).unwrap();
        assert_eq!(p.encode_batch(&pts, 5).unwrap(), p.encode_batch(&pts, 5).unwrap());
    }

    #[test]
    fn rejects_mismatched_m() {
        let config = NoiseShapingConfig::new(Scheme::sigma_delta(1), 4, 5, Alphabet::from_bits(1).unwrap()).unwrap();
        assert!(Pipeline::new(map(64), Method::NoiseShaping(config)).is_err());
    }

    #[test]
    fn mixed_encodings_are_rejected() {
        let p = Pipeline::new(map(16), Method::Rff).unwrap();
        let q = Pipeline::new(map(16), Method::Exact).unwrap();
        let mut rng = rng_from_seed(0);
        let a = p.encode(&[0.0, 0.0], &mut rng).unwrap();
        let b = q.encode(&[0.0, 0.0], &mut rng).unwrap();
        assert!(p.estimate(&a, &b).is_err());
    }

    #[test]
    fn footprints() {
        let m = 1000;
        let a1 = Alphabet::from_bits(1).unwrap();
        let rff = Pipeline::new(map(m), Method::Rff).unwrap();
        assert_eq!(rff.footprint().unwrap().bits, 32_000);
        let sd = NoiseShapingConfig::new(Scheme::sigma_delta(1), 4, 250, a1).unwrap();
        let sd = Pipeline::new(map(m), Method::NoiseShaping(sd)).unwrap();
        assert_eq!(sd.footprint().unwrap().bits, 750);
    }
}
