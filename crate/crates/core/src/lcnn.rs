//! Bias-free, activation-free stack of 3x3 convolutions and its collapse into a
//! single restoration kernel.
//!
//! Every layer is linear and shift-invariant, so the whole stack is one
//! convolution. [`forward`] pads its input once by the receptive radius and
//! then runs each layer in "valid" mode, which makes it identical to
//! `conv2d_same(x, extract_drk(model))` everywhere, borders included.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{read_exact, read_f64, read_u32, Grid2D};
use crate::signal::{conv2d_full, make_impulse, pad, PadMode, Placement};

pub const TAP_SIDE: usize = 3;
pub const TAPS_PER_FILTER: usize = TAP_SIDE * TAP_SIDE;
const LCNN_MAGIC: &[u8; 4] = b"LCNN";

/// Channel chain of the network, e.g. `[1, 32, 32, 32, 32, 1]` for five layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology(Vec<usize>);

impl Topology {
    pub fn new(channels: Vec<usize>) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::contract("topology needs at least one layer"));
        }
        if channels[0] != 1 || *channels.last().unwrap() != 1 {
            return Err(Error::contract(format!(
                "topology must start and end with one channel, got {channels:?}"
            )));
        }
        if channels.contains(&0) {
            return Err(Error::contract("zero-width layer in topology"));
        }
        Ok(Self(channels))
    }

    /// Depth `depth`, hidden width `width`.
    pub fn uniform(depth: usize, width: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::contract("depth must be positive"));
        }
        let mut ch = vec![width; depth + 1];
        ch[0] = 1;
        ch[depth] = 1;
        Self::new(ch)
    }

    pub fn channels(&self) -> &[usize] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }
}

impl Default for Topology {
    fn default() -> Self {
        Self(vec![1, 32, 32, 32, 32, 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Taps drawn from `N(0, 1 / (in_channels * 9))`.
    ScaledNormal,
    /// Channel 0 carries a centered delta through every layer; every tap gets
    /// Gaussian noise of the given standard deviation on top.
    NearIdentity { noise_std: f64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::NearIdentity { noise_std: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    out_channels: usize,
    in_channels: usize,
    /// `out x in x 3 x 3`, row-major.
    taps: Vec<f64>,
}

impl ConvLayer {
    pub fn new(out_channels: usize, in_channels: usize, taps: Vec<f64>) -> Result<Self> {
        if taps.len() != out_channels * in_channels * TAPS_PER_FILTER {
            return Err(Error::contract(format!(
                "layer {out_channels}x{in_channels} needs {} taps, got {}",
                out_channels * in_channels * TAPS_PER_FILTER,
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::contract("non-finite tap"));
        }
        Ok(Self {
            out_channels,
            in_channels,
            taps,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            taps: vec![0.0; out_channels * in_channels * TAPS_PER_FILTER],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [f64] {
        &mut self.taps
    }

    /// The 3x3 filter from input channel `i` to output channel `o`.
    pub fn filter(&self, o: usize, i: usize) -> &[f64] {
        let start = (o * self.in_channels + i) * TAPS_PER_FILTER;
        &self.taps[start..start + TAPS_PER_FILTER]
    }

    pub fn filter_mut(&mut self, o: usize, i: usize) -> &mut [f64] {
        let start = (o * self.in_channels + i) * TAPS_PER_FILTER;
        &mut self.taps[start..start + TAPS_PER_FILTER]
    }

    fn filter_grid(&self, o: usize, i: usize) -> Grid2D {
        Grid2D::new(TAP_SIDE, TAP_SIDE, self.filter(o, i).to_vec()).expect("finite 3x3 filter")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcnnModel {
    layers: Vec<ConvLayer>,
}

impl LcnnModel {
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("model needs at least one layer"));
        }
        if layers[0].in_channels != 1 || layers.last().unwrap().out_channels != 1 {
            return Err(Error::contract("model must map one channel to one channel"));
        }
        for w in layers.windows(2) {
            if w[0].out_channels != w[1].in_channels {
                return Err(Error::contract(format!(
                    "channel chain broken: {} -> {}",
                    w[0].out_channels, w[1].in_channels
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros(topology: &Topology) -> Self {
        let layers = topology
            .channels()
            .windows(2)
            .map(|w| ConvLayer::zeros(w[1], w[0]))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn topology(&self) -> Topology {
        let mut ch = vec![self.layers[0].in_channels];
        ch.extend(self.layers.iter().map(|l| l.out_channels));
        Topology(ch)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Samples each side of the center that the composite operator reaches.
    pub fn receptive_radius(&self) -> usize {
        self.layers.len() * (TAP_SIDE - 1) / 2
    }

    /// Side length of the collapsed kernel, `1 + depth * (3 - 1)`.
    pub fn drk_size(&self) -> usize {
        2 * self.receptive_radius() + 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.taps.len()).sum()
    }

    pub fn scale_layer(&mut self, layer: usize, alpha: f64) {
        for t in &mut self.layers[layer].taps {
            *t *= alpha;
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(LCNN_MAGIC)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.out_channels as u32).to_le_bytes())?;
            w.write_all(&(l.in_channels as u32).to_le_bytes())?;
        }
        for l in &self.layers {
            for t in &l.taps {
                w.write_all(&t.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "LCNN magic")?;
        if &magic != LCNN_MAGIC {
            return Err(Error::format("bad LCNN magic"));
        }
        let count = read_u32(&mut r)? as usize;
        if count == 0 || count > 1024 {
            return Err(Error::format(format!("implausible layer count {count}")));
        }
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            let out = read_u32(&mut r)? as usize;
            let inp = read_u32(&mut r)? as usize;
            if out == 0 || inp == 0 || out > 4096 || inp > 4096 {
                return Err(Error::format(format!("implausible layer shape {out}x{inp}")));
            }
            shapes.push((out, inp));
        }
        let mut layers = Vec::with_capacity(count);
        for (out, inp) in shapes {
            let n = out * inp * TAPS_PER_FILTER;
            let mut taps = Vec::with_capacity(n);
            for _ in 0..n {
                taps.push(read_f64(&mut r)?);
            }
            layers.push(ConvLayer::new(out, inp, taps).map_err(|e| Error::format(e.to_string()))?);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|e| Error::format(e.to_string()))? != 0 {
            return Err(Error::format("trailing bytes after LCNN payload"));
        }
        Self::new(layers).map_err(|e| Error::format(format!("LCNN topology: {e}")))
    }
}

pub fn init_model<R: Rng + ?Sized>(
    rng: &mut R,
    topology: &Topology,
    scheme: InitScheme,
) -> Result<LcnnModel> {
    let mut model = LcnnModel::zeros(topology);
    match scheme {
        InitScheme::ScaledNormal => {
            for layer in &mut model.layers {
                let std = (1.0 / (layer.in_channels * TAPS_PER_FILTER) as f64).sqrt();
                let dist = Normal::new(0.0, std).expect("positive std");
                for t in &mut layer.taps {
                    *t = dist.sample(rng);
                }
            }
        }
        InitScheme::NearIdentity { noise_std } => {
            if !(noise_std >= 0.0) || !noise_std.is_finite() {
                return Err(Error::contract(format!("bad noise std {noise_std}")));
            }
            for layer in &mut model.layers {
                if noise_std > 0.0 {
                    let dist = Normal::new(0.0, noise_std).expect("positive std");
                    for t in &mut layer.taps {
                        *t = dist.sample(rng);
                    }
                }
                layer.filter_mut(0, 0)[TAPS_PER_FILTER / 2] += 1.0;
            }
        }
    }
    Ok(model)
}

/// `acc += valid_conv(input, filter)`, where `acc` is `(rows-2) x (cols-2)`.
fn accumulate_valid3(acc: &mut [f64], input: &Grid2D, filter: &[f64]) {
    let (rows, cols) = input.dims();
    let (or, oc) = (rows - 2, cols - 2);
    debug_assert_eq!(acc.len(), or * oc);
    let data = input.data();
    for m in 0..TAP_SIDE {
        for n in 0..TAP_SIDE {
            let w = filter[(TAP_SIDE - 1 - m) * TAP_SIDE + (TAP_SIDE - 1 - n)];
            if w == 0.0 {
                continue;
            }
            for i in 0..or {
                let src = &data[(i + m) * cols + n..(i + m) * cols + n + oc];
                let dst = &mut acc[i * oc..(i + 1) * oc];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}

fn run_layer(layer: &ConvLayer, inputs: &[Grid2D]) -> Vec<Grid2D> {
    let (rows, cols) = inputs[0].dims();
    (0..layer.out_channels)
        .into_par_iter()
        .map(|o| {
            let mut acc = vec![0.0; (rows - 2) * (cols - 2)];
            for (i, x) in inputs.iter().enumerate() {
                accumulate_valid3(&mut acc, x, layer.filter(o, i));
            }
            Grid2D::new(rows - 2, cols - 2, acc).expect("finite activations")
        })
        .collect()
}

/// Runs the network on one plane with the given boundary extension.
pub fn forward_padded(model: &LcnnModel, input: &Grid2D, pad_mode: PadMode) -> Grid2D {
    let r = model.receptive_radius();
    let mut acts = vec![pad(input, r, r, pad_mode)];
    for layer in &model.layers {
        acts = run_layer(layer, &acts);
    }
    acts.pop().expect("single output channel")
}

/// Same-size, zero-padded network output.
pub fn forward(model: &LcnnModel, input: &Grid2D) -> Grid2D {
    forward_padded(model, input, PadMode::Zero)
}

/// Deep restoration kernel: the explicit impulse response of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Drk(Grid2D);

impl Drk {
    pub fn new(grid: Grid2D) -> Result<Self> {
        if grid.rows() % 2 == 0 || grid.cols() % 2 == 0 {
            return Err(Error::contract(format!(
                "restoration kernel must have odd dims, got {}x{}",
                grid.rows(),
                grid.cols()
            )));
        }
        Ok(Self(grid))
    }

    pub fn delta(size: usize) -> Result<Self> {
        Self::new(make_impulse(size, size, Placement::Center)?)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.0
    }

    pub fn into_grid(self) -> Grid2D {
        self.0
    }

    pub fn size(&self) -> usize {
        self.0.rows()
    }

    pub fn center(&self) -> f64 {
        self.0[(self.0.rows() / 2, self.0.cols() / 2)]
    }
}

/// Feeds a centered impulse through [`forward`].
pub fn extract_drk(model: &LcnnModel) -> Drk {
    let n = model.drk_size();
    let impulse = make_impulse(n, n, Placement::Center).expect("odd size");
    Drk(forward(model, &impulse))
}

/// Per-layer impulse responses, built by full convolution of the taps.
///
/// `responses[l][c]` is the response of channel `c` after layer `l + 1`; the
/// last entry holds the collapsed kernel.
#[derive(Debug, Clone)]
pub struct Composition {
    responses: Vec<Vec<Grid2D>>,
}

impl Composition {
    pub fn new(model: &LcnnModel) -> Self {
        let mut responses: Vec<Vec<Grid2D>> = Vec::with_capacity(model.depth());
        let unit = vec![Grid2D::filled(1, 1, 1.0)];
        for layer in &model.layers {
            let prev = responses.last().unwrap_or(&unit);
            let next = (0..layer.out_channels)
                .into_par_iter()
                .map(|o| {
                    let mut acc: Option<Grid2D> = None;
                    for (i, h) in prev.iter().enumerate() {
                        let term = conv2d_full(h, &layer.filter_grid(o, i)).expect("small grids");
                        acc = Some(match acc {
                            None => term,
                            Some(a) => a.lin_comb(1.0, &term, 1.0).expect("same dims"),
                        });
                    }
                    acc.expect("at least one input channel")
                })
                .collect();
            responses.push(next);
        }
        Self { responses }
    }

    pub fn drk(&self) -> Drk {
        Drk(self.responses.last().unwrap()[0].clone())
    }

    /// Pulls a gradient on the collapsed kernel back onto every tap.
    ///
    /// Returns one flat gradient per layer, laid out like [`ConvLayer::taps`].
    pub fn backprop(&self, model: &LcnnModel, grad_drk: &Grid2D) -> Vec<Vec<f64>> {
        let depth = model.depth();
        let mut grads = vec![Vec::new(); depth];
        let mut upstream = vec![grad_drk.clone()];
        let unit = vec![Grid2D::filled(1, 1, 1.0)];
        for l in (0..depth).rev() {
            let layer = &model.layers[l];
            let inputs = if l == 0 { &unit } else { &self.responses[l - 1] };
            let side = inputs[0].rows();

            // dL/dw[o, i][u, v] = sum_ab G[o][a + u, b + v] h[i][a, b]
            let mut g = vec![0.0; layer.taps.len()];
            g.par_chunks_mut(layer.in_channels * TAPS_PER_FILTER)
                .enumerate()
                .for_each(|(o, chunk)| {
                    let up = &upstream[o];
                    for (i, h) in inputs.iter().enumerate() {
                        let dst = &mut chunk[i * TAPS_PER_FILTER..(i + 1) * TAPS_PER_FILTER];
                        for u in 0..TAP_SIDE {
                            for v in 0..TAP_SIDE {
                                let mut s = 0.0;
                                for a in 0..side {
                                    for b in 0..side {
                                        s += up[(a + u, b + v)] * h[(a, b)];
                                    }
                                }
                                dst[u * TAP_SIDE + v] = s;
                            }
                        }
                    }
                });
            grads[l] = g;

            if l > 0 {
                // dL/dh[i][a, b] = sum_o sum_uv G[o][a + u, b + v] w[o, i][u, v]
                upstream = (0..layer.in_channels)
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = Grid2D::zeros(side, side);
                        for (o, up) in upstream.iter().enumerate() {
                            let w = layer.filter(o, i);
                            for a in 0..side {
                                for b in 0..side {
                                    let mut s = 0.0;
                                    for u in 0..TAP_SIDE {
                                        for v in 0..TAP_SIDE {
                                            s += up[(a + u, b + v)] * w[u * TAP_SIDE + v];
                                        }
                                    }
                                    acc[(a, b)] += s;
                                }
                            }
                        }
                        acc
                    })
                    .collect();
            }
        }
        grads
    }
}

/// Collapsed kernel via sequential full convolution of the taps.
pub fn compose_drk(model: &LcnnModel) -> Drk {
    Composition::new(model).drk()
}

pub fn save_model(model: &LcnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    model
        .write_to(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LcnnModel> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    LcnnModel::read_from(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::conv2d_same;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64, topo: &Topology) -> LcnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_model(&mut rng, topo, InitScheme::ScaledNormal).unwrap()
    }

    fn random_image(seed: u64, r: usize, c: usize) -> Grid2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid2D::from_fn(r, c, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn default_topology_shape() {
        let m = LcnnModel::zeros(&Topology::default());
        assert_eq!(m.depth(), 5);
        assert_eq!(m.drk_size(), 11);
        assert_eq!(m.param_count(), 9 * (32 + 3 * 32 * 32 + 32));
        assert_eq!(m.param_count(), 28_224);
        assert!(Topology::new(vec![2, 4, 1]).is_err());
        assert!(Topology::new(vec![1]).is_err());
    }

    #[test]
    fn noiseless_near_identity_collapses_to_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = init_model(
            &mut rng,
            &Topology::default(),
            InitScheme::NearIdentity { noise_std: 0.0 },
        )
        .unwrap();
        assert_eq!(extract_drk(&m), Drk::delta(11).unwrap());
        let x = random_image(1, 20, 17);
        assert!(forward(&m, &x).max_abs_diff(&x).unwrap() == 0.0);
    }

    #[test]
    fn scaled_normal_is_deterministic_with_expected_variance() {
        let topo = Topology::default();
        let a = random_model(7, &topo);
        assert_eq!(a, random_model(7, &topo));
        // The 32 -> 32 layers have 9216 taps each; pool the three of them.
        let taps: Vec<f64> = a.layers()[1..4].iter().flat_map(|l| l.taps().to_vec()).collect();
        assert!(taps.len() >= 10_000);
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        let var = taps.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / taps.len() as f64;
        let want = 1.0 / (32.0 * 9.0);
        assert!(var > want / 3.0 && var < want * 3.0, "var {var} vs {want}");
    }

    #[test]
    fn zero_model_gives_zero_output() {
        let m = LcnnModel::zeros(&Topology::default());
        let x = random_image(2, 12, 12);
        assert!(forward(&m, &x).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_matches_center_supported_input() {
        let m = random_model(3, &Topology::uniform(5, 4).unwrap());
        let mut x = Grid2D::zeros(11, 11);
        x[(5, 5)] = 1.0;
        assert_eq!(forward(&m, &x), *extract_drk(&m).grid());
    }

    #[test]
    fn both_extraction_routes_agree() {
        for seed in 0..3 {
            let m = random_model(seed, &Topology::default());
            let a = extract_drk(&m);
            let b = compose_drk(&m);
            assert!(a.grid().max_abs_diff(b.grid()).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn forward_equals_single_convolution() {
        let m = random_model(4, &Topology::default());
        let drk = extract_drk(&m);
        let x = random_image(5, 64, 64);
        let a = forward(&m, &x);
        let b = conv2d_same(&x, drk.grid(), PadMode::Zero).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-8);
        let a = forward_padded(&m, &x, PadMode::Reflect);
        let b = conv2d_same(&x, drk.grid(), PadMode::Reflect).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-8);
    }

    #[test]
    fn forward_is_linear() {
        let m = random_model(6, &Topology::uniform(3, 4).unwrap());
        let x = random_image(7, 15, 13);
        let y = random_image(8, 15, 13);
        let (alpha, beta) = (0.37, -1.9);
        let lhs = forward(&m, &x.lin_comb(alpha, &y, beta).unwrap());
        let rhs = forward(&m, &x).lin_comb(alpha, &forward(&m, &y), beta).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9);
    }

    #[test]
    fn drk_is_multilinear_in_layers() {
        let mut m = random_model(9, &Topology::default());
        let before = extract_drk(&m);
        m.scale_layer(2, -2.5);
        let after = extract_drk(&m);
        let want = before.grid().scaled(-2.5);
        assert!(after.grid().max_abs_diff(&want).unwrap() <= 1e-12);
    }

    #[test]
    fn hidden_channel_permutation_is_a_gauge_symmetry() {
        let m = random_model(10, &Topology::default());
        let mut p = m.clone();
        // Swap hidden channel 0 and 1 between layers 2 and 3 (outputs of 2, inputs of 3).
        let (k, k1) = (1, 2);
        let l = &mut p.layers_mut()[k];
        for i in 0..l.in_channels() {
            let a = l.filter(0, i).to_vec();
            let b = l.filter(1, i).to_vec();
            l.filter_mut(0, i).copy_from_slice(&b);
            l.filter_mut(1, i).copy_from_slice(&a);
        }
        let l = &mut p.layers_mut()[k1];
        for o in 0..l.out_channels() {
            let a = l.filter(o, 0).to_vec();
            let b = l.filter(o, 1).to_vec();
            l.filter_mut(o, 0).copy_from_slice(&b);
            l.filter_mut(o, 1).copy_from_slice(&a);
        }
        assert_ne!(p, m);
        let d = extract_drk(&p).grid().max_abs_diff(extract_drk(&m).grid()).unwrap();
        assert!(d <= 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = random_model(11, &Topology::default());
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = LcnnModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(extract_drk(&back), extract_drk(&m));

        assert!(matches!(
            LcnnModel::read_from(&buf[..buf.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut bad = buf.clone();
        bad[0] = b'M';
        assert!(matches!(LcnnModel::read_from(bad.as_slice()), Err(Error::Format(_))));
        // Break the channel chain: first layer claims 2 inputs.
        let mut bad = buf.clone();
        bad[12..16].copy_from_slice(&2u32.to_le_bytes());
        assert!(LcnnModel::read_from(bad.as_slice()).is_err());
    }
}
