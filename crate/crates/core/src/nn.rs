//! Small dense networks with exact backpropagation and Adam.
//!
//! Weights are stored `out x in`, so a layer computes `y = x W^T + b` on a
//! row-major batch `x`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PARAM_MAGIC: &[u8; 4] = b"SLNC";
pub const PARAM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// Rectified-linear activation after the affine map.
    pub relu: bool,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer activations from a forward pass; `acts[0]` is the input.
pub struct Trace {
    pub acts: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("trace has an input")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. Every layer but the last is
    /// rectified; callers may switch individual layers to linear afterwards.
    pub fn glorot<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, io)| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.gen_range(-a..=a)),
                    b: Array1::zeros(fan_out),
                    relu: i + 1 < n,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.len()),
                    relu: l.relu,
                })
                .collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].fan_in()];
        s.extend(self.layers.iter().map(Dense::fan_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::fan_out)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat parameter addressing: per layer, weights row-major then biases.
    pub fn param(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.w.len() {
                return l.w[(i / l.fan_in(), i % l.fan_in())];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return l.b[i];
            }
            i -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut i: usize, v: f64) {
        for l in &mut self.layers {
            if i < l.w.len() {
                let c = l.fan_in();
                l.w[(i / c, i % c)] = v;
                return;
            }
            i -= l.w.len();
            if i < l.b.len() {
                l.b[i] = v;
                return;
            }
            i -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// Runs the first `depth` layers.
    pub fn forward_to(&self, x: ArrayView2<f64>, depth: usize) -> Array2<f64> {
        let mut h = x.to_owned();
        for l in &self.layers[..depth] {
            h = affine(l, h.view());
        }
        h
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_to(x, self.layers.len())
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let next = affine(l, acts.last().unwrap().view());
            acts.push(next);
        }
        Trace { acts }
    }

    /// Gradients of a scalar loss given `d_out = dL/d(output)`.
    pub fn backward(&self, trace: &Trace, d_out: Array2<f64>) -> Mlp {
        let mut grads = self.zeros_like();
        let mut delta = d_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            if l.relu {
                Zip::from(&mut delta)
                    .and(&trace.acts[i + 1])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            let input = &trace.acts[i];
            grads.layers[i].w = delta.t().dot(input);
            grads.layers[i].b = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&l.w);
            }
        }
        grads
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.sizes();
        let mut out = Vec::with_capacity(12 + 4 * sizes.len() + 8 * self.num_params());
        out.extend_from_slice(PARAM_MAGIC);
        out.extend_from_slice(&PARAM_VERSION.to_le_bytes());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.w.iter().chain(l.b.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses the binary parameter format. Activations come back in the
    /// default arrangement (all hidden layers rectified).
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::malformed(path, 0, msg);
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != PARAM_MAGIC {
            return Err(bad("bad magic, not a parameter file"));
        }
        let version = read_u32(&mut r).ok_or_else(|| bad("truncated header"))?;
        if version != PARAM_VERSION {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                found: version.to_string(),
                expected: PARAM_VERSION.to_string(),
            });
        }
        let n = read_u32(&mut r).ok_or_else(|| bad("truncated layer table"))? as usize;
        if !(2..=64).contains(&n) {
            return Err(bad("layer table length out of range"));
        }
        let sizes = (0..n)
            .map(|_| read_u32(&mut r).map(|s| s as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("truncated layer table"))?;
        if sizes.iter().any(|&s| s == 0 || s > 1 << 16) {
            return Err(bad("layer size out of range"));
        }
        let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if r.len() != expected * 8 {
            return Err(bad(&format!(
                "expected {} parameter bytes, found {}",
                expected * 8,
                r.len()
            )));
        }
        let mut vals = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, io)| {
                let w = Array2::from_shape_fn((io[1], io[0]), |_| vals.next().unwrap());
                let b = Array1::from_shape_fn(io[1], |_| vals.next().unwrap());
                Dense {
                    w,
                    b,
                    relu: i < last,
                }
            })
            .collect();
        let mlp = Self { layers };
        if !mlp.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(mlp)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Hex sha256 of the serialized parameters.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

fn read_u32(r: &mut &[u8]) -> Option<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).ok()?;
    Some(u32::from_le_bytes(b))
}

fn affine(l: &Dense, x: ArrayView2<f64>) -> Array2<f64> {
    let mut y = x.dot(&l.w.t());
    y += &l.b;
    if l.relu {
        y.mapv_inplace(|v| v.max(0.0));
    }
    y
}

/// Adam with bias correction.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Mlp,
    v: Mlp,
}

impl Adam {
    pub fn new(model: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: model.zeros_like(),
            v: model.zeros_like(),
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (lr, eps) = (self.lr, self.eps);
        for (((p, g), m), v) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let upd = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            Zip::from(&mut p.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(upd);
            Zip::from(&mut p.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(upd);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> Mlp {
        Mlp::glorot(&[3, 5, 2], &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn glorot_bounds() {
        let m = Mlp::glorot(&[10, 20, 4], &mut ChaCha8Rng::seed_from_u64(0));
        let a = (6.0f64 / 30.0).sqrt();
        assert!(m.layers[0].w.iter().all(|v| v.abs() <= a));
        assert!(m.layers[0].relu && !m.layers[1].relu);
        assert_eq!(m.num_params(), 10 * 20 + 20 + 20 * 4 + 4);
    }

    #[test]
    fn flat_param_addressing() {
        let mut m = net();
        for i in 0..m.num_params() {
            m.set_param(i, i as f64);
        }
        assert_eq!(m.layers[0].w[(1, 2)], 5.0);
        assert_eq!(m.layers[0].b[0], 15.0);
        assert_eq!(m.layers[1].w[(0, 0)], 20.0);
        assert_eq!(m.param(31), 31.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Loss = sum of outputs squared / 2.
        let m = net();
        let x = array![[0.3, -0.2, 0.9], [0.1, 0.5, -0.4]];
        let loss = |m: &Mlp| m.forward(x.view()).mapv(|v| v * v).sum() / 2.0;
        let tr = m.forward_trace(x.view());
        let g = m.backward(&tr, tr.output().clone());
        let h = 1e-6;
        for i in 0..m.num_params() {
            let mut p = m.clone();
            p.set_param(i, m.param(i) + h);
            let up = loss(&p);
            p.set_param(i, m.param(i) - h);
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - g.param(i)).abs() < 1e-7,
                "param {i}: {fd} vs {}",
                g.param(i)
            );
        }
    }

    #[test]
    fn bytes_round_trip() {
        let m = net();
        let back = Mlp::from_bytes(&m.to_bytes(), Path::new("x")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("enc.bin");
        let mut bytes = net().to_bytes();
        assert!(Mlp::from_bytes(b"NOPE", p).is_err());
        bytes.pop();
        assert!(matches!(
            Mlp::from_bytes(&bytes, p),
            Err(Error::MalformedFile { .. })
        ));
        let mut v2 = net().to_bytes();
        v2[4] = 2;
        assert!(matches!(
            Mlp::from_bytes(&v2, p),
            Err(Error::SchemaVersion { .. })
        ));
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut m = Mlp::glorot(&[2, 1], &mut ChaCha8Rng::seed_from_u64(3));
        let x = array![[1.0, 2.0], [-1.0, 0.5], [0.3, 0.3]];
        let loss = |m: &Mlp| m.forward(x.view()).mapv(|v| v * v).sum() / 2.0;
        let start = loss(&m);
        let mut opt = Adam::new(&m, 1e-2);
        for _ in 0..1000 {
            let tr = m.forward_trace(x.view());
            let g = m.backward(&tr, tr.output().clone());
            opt.step(&mut m, &g);
        }
        assert!(loss(&m) < start * 0.01);
    }
}
