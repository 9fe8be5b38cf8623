//! Tanh MLPs with a diagonal Gaussian head (policies) or a scalar head (value
//! functions), hand-written backpropagation and a binary weight format.
//!
//! All parameters of one network live in a single flat `f64` vector so the
//! optimizer can treat them uniformly. Layout, layer by layer: the weight
//! matrix (`out x in`, row-major) followed by the bias (`out`). A Gaussian
//! network appends one log-std per output dimension.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

pub const HIDDEN: [usize; 3] = [100, 50, 25];

pub const WEIGHT_MAGIC: [u8; 4] = *b"RMLP";
pub const WEIGHT_VERSION: u32 = 1;

/// Output-layer weights of a fresh Gaussian network are shrunk by this factor
/// so the initial mean action is close to zero.
const HEAD_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Mean output plus a state-independent log-std per dimension.
    Gaussian,
    /// Plain output, no log-std.
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    layer_dims: Vec<usize>,
    head: Head,
    theta: Vec<f64>,
}

/// `[input, 100, 50, 25, output]`.
pub fn standard_dims(input: usize, output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend(HIDDEN);
    dims.push(output);
    dims
}

fn param_count(dims: &[usize], head: Head) -> usize {
    let affine: usize = dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
    match head {
        Head::Gaussian => affine + dims[dims.len() - 1],
        Head::Value => affine,
    }
}

impl MlpParameters {
    pub fn zeros(layer_dims: &[usize], head: Head) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::config(format!("bad layer dims {layer_dims:?}")));
        }
        Ok(MlpParameters {
            layer_dims: layer_dims.to_vec(),
            head,
            theta: vec![0.0; param_count(layer_dims, head)],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases and log-std zero.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(layer_dims, head)?;
        let last = p.n_layers() - 1;
        for l in 0..p.n_layers() {
            let fan_in = p.layer_dims[l];
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if l == last && head == Head::Gaussian {
                bound *= HEAD_INIT_SCALE;
            }
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
            let (w, _) = p.layer_range(l);
            for x in &mut p.theta[w] {
                *x = dist.sample(rng);
            }
        }
        Ok(p)
    }

    pub fn policy<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Result<Self> {
        Self::init(&standard_dims(input, output), Head::Gaussian, rng)
    }

    pub fn value<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Result<Self> {
        Self::init(&standard_dims(input, 1), Head::Value, rng)
    }

    /// Rebuilds from a flat parameter vector in the layout described above.
    pub fn from_flat(layer_dims: &[usize], head: Head, theta: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(layer_dims, head)?;
        if theta.len() != p.theta.len() {
            return Err(Error::Dimension {
                what: "flat parameters",
                expected: p.theta.len(),
                got: theta.len(),
            });
        }
        p.theta = theta;
        p.check_finite()?;
        Ok(p)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims[self.layer_dims.len() - 1]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Ranges of layer `l`'s weight matrix and bias within `theta`.
    fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let mut start = 0;
        for w in self.layer_dims.windows(2).take(l) {
            start += w[1] * w[0] + w[1];
        }
        let (inp, out) = (self.layer_dims[l], self.layer_dims[l + 1]);
        let w_end = start + out * inp;
        (start..w_end, w_end..w_end + out)
    }

    fn log_std_start(&self) -> usize {
        self.theta.len() - self.log_std().len()
    }

    /// Row-major `out x in` weight matrix of layer `l`.
    pub fn weight(&self, l: usize) -> &[f64] {
        &self.theta[self.layer_range(l).0]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.theta[self.layer_range(l).1]
    }

    pub fn log_std(&self) -> &[f64] {
        match self.head {
            Head::Gaussian => &self.theta[self.theta.len() - self.output_dim()..],
            Head::Value => &[],
        }
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let start = self.log_std_start();
        &mut self.theta[start..]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.theta.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("parameter {i}"))),
            None => Ok(()),
        }
    }

    /// Runs the network, keeping every layer's activation for `backward`.
    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut acts = Vec::with_capacity(self.layer_dims.len());
        acts.push(input.to_vec());
        for l in 0..self.n_layers() {
            let (w, b) = self.layer_range(l);
            let (w, b) = (&self.theta[w], &self.theta[b]);
            let x = &acts[l];
            let hidden = l + 1 < self.n_layers();
            let y: Vec<f64> = b
                .iter()
                .zip(w.chunks_exact(x.len()))
                .map(|(bi, row)| {
                    let z = bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    if hidden {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(y);
        }
        Ok(Trace { acts })
    }

    /// Raw network output (the mean for a Gaussian head).
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.acts.pop().expect("at least one layer"))
    }

    /// Adds `d(loss)/d(theta)` to `grad` given `d(loss)/d(output)` for the
    /// traced input. The log-std part of `grad` is left alone.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.theta.len(), "gradient buffer length");
        assert_eq!(d_out.len(), self.output_dim(), "output gradient length");
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (wr, br) = self.layer_range(l);
            let x = &trace.acts[l];
            let inp = x.len();
            for (i, d) in delta.iter().enumerate() {
                grad[br.start + i] += d;
                let row = &mut grad[wr.start + i * inp..wr.start + (i + 1) * inp];
                for (g, xj) in row.iter_mut().zip(x) {
                    *g += d * xj;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.theta[wr];
            let mut prev = vec![0.0; inp];
            for (i, d) in delta.iter().enumerate() {
                for (p, wij) in prev.iter_mut().zip(&w[i * inp..(i + 1) * inp]) {
                    *p += wij * d;
                }
            }
            // x is the tanh output of the layer below
            for (p, xj) in prev.iter_mut().zip(x) {
                *p *= 1.0 - xj * xj;
            }
            delta = prev;
        }
    }

    /// Adds a log-std gradient into the tail of `grad`.
    pub fn backward_log_std(&self, d_log_std: &[f64], grad: &mut [f64]) {
        let start = self.log_std_start();
        for (g, d) in grad[start..].iter_mut().zip(d_log_std) {
            *g += d;
        }
    }
}

/// Activations of every layer for one input, `acts[0]` being the input.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("nonempty trace")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicyOutput {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn forward(p: &MlpParameters, obs: &[f64]) -> Result<GaussianPolicyOutput> {
    if p.head() != Head::Gaussian {
        return Err(Error::config("forward needs a Gaussian-head network"));
    }
    Ok(GaussianPolicyOutput {
        mean: p.output(obs)?,
        std: p.log_std().iter().map(|s| s.exp()).collect(),
    })
}

pub fn value(p: &MlpParameters, obs: &[f64]) -> Result<f64> {
    if p.output_dim() != 1 {
        return Err(Error::Dimension {
            what: "value head",
            expected: 1,
            got: p.output_dim(),
        });
    }
    Ok(p.output(obs)?[0])
}

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian log-density.
pub fn log_prob(out: &GaussianPolicyOutput, action: &[f64]) -> f64 {
    assert_eq!(action.len(), out.mean.len(), "action dimension");
    out.mean
        .iter()
        .zip(&out.std)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) / s;
            -0.5 * z * z - s.ln() - HALF_LOG_2PI
        })
        .sum()
}

/// Log-density in terms of log-std, with its gradients with respect to the
/// mean and the log-std.
pub fn log_prob_with_grad(mean: &[f64], log_std: &[f64], action: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut lp = 0.0;
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_log_std = Vec::with_capacity(mean.len());
    for ((m, ls), a) in mean.iter().zip(log_std).zip(action) {
        let z = (a - m) * (-ls).exp();
        lp += -0.5 * z * z - ls - HALF_LOG_2PI;
        d_mean.push(z * (-ls).exp());
        d_log_std.push(z * z - 1.0);
    }
    (lp, d_mean, d_log_std)
}

/// Entropy of the diagonal Gaussian; its gradient in each log-std is 1.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_2PI).sum()
}

pub fn sample_action<R: Rng + ?Sized>(out: &GaussianPolicyOutput, rng: &mut R) -> Vec<f64> {
    out.mean
        .iter()
        .zip(&out.std)
        .map(|(m, s)| {
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        })
        .collect()
}

// Weight file, all integers and floats little-endian:
//   magic "RMLP" | version u32 | head u8 (0 gaussian, 1 value)
//   | n_dims u32 | n_dims x u32 layer dims | n_values u64 | n_values x f64
// The values are the flat parameter vector described at the top of the module.

pub fn save_weights(p: &MlpParameters, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * p.len());
    buf.extend_from_slice(&WEIGHT_MAGIC);
    buf.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    buf.push(match p.head {
        Head::Gaussian => 0,
        Head::Value => 1,
    });
    buf.extend_from_slice(&(p.layer_dims.len() as u32).to_le_bytes());
    for d in &p.layer_dims {
        buf.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(p.theta.len() as u64).to_le_bytes());
    for x in &p.theta {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.at..end];
                self.at = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {} (wanted {n} more)", self.at)),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<MlpParameters, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != WEIGHT_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != WEIGHT_VERSION {
        return Err(format!("unsupported format version {version} (expected {WEIGHT_VERSION})"));
    }
    let head = match r.take(1)?[0] {
        0 => Head::Gaussian,
        1 => Head::Value,
        h => return Err(format!("unknown head tag {h}")),
    };
    let n_dims = r.u32()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(format!("implausible layer count {n_dims}"));
    }
    let dims = (0..n_dims)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if dims.contains(&0) {
        return Err(format!("zero-width layer in {dims:?}"));
    }
    let expected = param_count(&dims, head);
    let n_values = r.u64()?;
    if n_values != expected as u64 {
        return Err(format!("{n_values} values for layer dims {dims:?}, expected {expected}"));
    }
    let raw = r.take(8 * expected)?;
    if r.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.at));
    }
    let theta: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
        return Err(format!("value {i} is not finite"));
    }
    Ok(MlpParameters {
        layer_dims: dims,
        head,
        theta,
    })
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpParameters> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|reason| Error::WeightFormat {
        path: path.to_path_buf(),
        reason,
    })
}

/// Loads and checks the input and output widths.
pub fn load_policy(path: impl AsRef<Path>, input: usize, output: usize) -> Result<MlpParameters> {
    let path = path.as_ref();
    let p = load_weights(path)?;
    let bad = |reason: String| Error::WeightFormat {
        path: path.to_path_buf(),
        reason,
    };
    if p.head != Head::Gaussian {
        return Err(bad("expected a Gaussian policy, found a value network".into()));
    }
    if p.input_dim() != input || p.output_dim() != output {
        return Err(bad(format!(
            "network maps {} -> {}, expected {input} -> {output}",
            p.input_dim(),
            p.output_dim()
        )));
    }
    Ok(p)
}
