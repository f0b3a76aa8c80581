// SPDX-License-Identifier: Apache-2.0

//! Little-endian binary formats.
//!
//! Every file opens with a 4-byte magic and a `u16` version.
//!
//! `CBDS` dataset:
//!
//! ```text
//! header    B u32, N_a u32, N_s u32, N_v u32, N_h u32, n_ue u32,
//!           f_ul f64, f_dl f64, bandwidth f64, seed u64
//! metadata  element_spacing f64 (0 = half wavelength),
//!           ue_area 4 x f64, ue_height f64,
//!           scatterer_area 4 x f64, scatterer_height f64, n_scatterers u32,
//!           B x (position 3 x f64, orientation f64)
//! records   n_ue x (position 3 x f64, split u8 (0 calibration, 1 test),
//!           uplink N_a*N_s complex64, B x downlink N_a*N_s complex64)
//! ```
//!
//! Rectangles are stored as `x_min, x_max, y_min, y_max`; a complex64 is two
//! `f32` (real, imaginary) and tensors are antenna-fastest.
//!
//! `CBCH` chart:
//!
//! ```text
//! n_neighbors u32, target_dim u32, oos_neighbors u32, n_cal u32, D u32,
//! n_cal x sample index u32, n_cal x D complex64 (channels),
//! n_cal x target_dim f64 (pseudo-locations)
//! ```
//!
//! `CBNN` checkpoint:
//!
//! ```text
//! input kind u8 (0 rff, 1 dense), head u8 (0 classification, 1 regression),
//! d u32, F u32, T u32, n_out u32, sigma f64,
//! d x f64 input shift, d x f64 input scale,
//! parameter blocks as f64 in `Network::param_blocks` order
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use chartbeam_core::channel::{
    ArrayConfig, CarrierConfig, ChannelSample, ChannelTensor, Dataset, Rect, SceneConfig, Split,
};
use chartbeam_core::chart::{Chart, ChartParams};
use chartbeam_core::neural::{
    Activation, DenseLayer, HeadKind, InputKind, InputLayer, InputScaling, Network, RffLayer,
};
use chartbeam_core::C32;

pub const DATASET_MAGIC: &[u8; 4] = b"CBDS";
pub const CHART_MAGIC: &[u8; 4] = b"CBCH";
pub const NETWORK_MAGIC: &[u8; 4] = b"CBNN";
pub const VERSION: u16 = 1;

/// Size of the fixed `CBDS` header including magic and version.
pub const DATASET_HEADER_BYTES: usize = 4 + 2 + 6 * 4 + 3 * 8 + 8;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    BadVersion(u16),
    #[error("truncated payload")]
    Truncated,
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            FormatError::Truncated
        } else {
            FormatError::Io(e)
        }
    }
}

impl From<chartbeam_core::Error> for FormatError {
    fn from(e: chartbeam_core::Error) -> Self {
        FormatError::Invalid(e.to_string())
    }
}

type FResult<T> = std::result::Result<T, FormatError>;

fn read_magic(r: &mut impl Read, expected: &[u8; 4]) -> FResult<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != expected {
        return Err(FormatError::BadMagic { expected: *expected, found });
    }
    let version = r.read_u16::<LE>()?;
    if version != VERSION {
        return Err(FormatError::BadVersion(version));
    }
    Ok(())
}

fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_u16::<LE>(VERSION)
}

fn count(x: usize) -> io::Result<u32> {
    u32::try_from(x).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "count exceeds u32"))
}

fn read_count(r: &mut impl Read) -> FResult<usize> {
    Ok(r.read_u32::<LE>()? as usize)
}

fn write_c32s(w: &mut impl Write, data: &[C32]) -> io::Result<()> {
    for z in data {
        w.write_f32::<LE>(z.re)?;
        w.write_f32::<LE>(z.im)?;
    }
    Ok(())
}

fn read_c32s(r: &mut impl Read, n: usize) -> FResult<Vec<C32>> {
    let mut buf = vec![0f32; 2 * n];
    r.read_f32_into::<LE>(&mut buf)?;
    Ok(buf.chunks_exact(2).map(|c| C32::new(c[0], c[1])).collect())
}

fn write_f64s(w: &mut impl Write, data: &[f64]) -> io::Result<()> {
    data.iter().try_for_each(|x| w.write_f64::<LE>(*x))
}

fn read_f64s(r: &mut impl Read, n: usize) -> FResult<Vec<f64>> {
    let mut buf = vec![0f64; n];
    r.read_f64_into::<LE>(&mut buf)?;
    Ok(buf)
}

fn write_rect(w: &mut impl Write, r: &Rect) -> io::Result<()> {
    write_f64s(w, &[r.x_min, r.x_max, r.y_min, r.y_max])
}

fn read_rect(r: &mut impl Read) -> FResult<Rect> {
    let v = read_f64s(r, 4)?;
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

fn expect_end(rest: &[u8]) -> FResult<()> {
    if rest.is_empty() {
        Ok(())
    } else {
        Err(FormatError::Trailing(rest.len()))
    }
}

/// Serialize a dataset. Both carriers must share bandwidth and subcarrier
/// count, since the header stores them once.
pub fn write_dataset(w: &mut impl Write, ds: &Dataset) -> FResult<()> {
    ds.validate()?;
    let (ul, dl) = (&ds.uplink_carrier, &ds.downlink_carrier);
    if ul.bandwidth != dl.bandwidth || ul.n_subcarriers != dl.n_subcarriers {
        return Err(FormatError::Invalid("uplink and downlink must share bandwidth and subcarriers".into()));
    }
    let sc = &ds.scene;
    write_magic(w, DATASET_MAGIC)?;
    for c in [sc.n_bs(), ds.array.n_antennas(), ul.n_subcarriers, ds.array.n_v, ds.array.n_h, ds.samples.len()] {
        w.write_u32::<LE>(count(c)?)?;
    }
    write_f64s(w, &[ul.center_frequency, dl.center_frequency, ul.bandwidth])?;
    w.write_u64::<LE>(sc.rng_seed)?;

    w.write_f64::<LE>(ds.array.element_spacing.unwrap_or(0.0))?;
    write_rect(w, &sc.ue_area)?;
    w.write_f64::<LE>(sc.ue_height)?;
    write_rect(w, &sc.scatterer_area)?;
    w.write_f64::<LE>(sc.scatterer_height)?;
    w.write_u32::<LE>(count(sc.n_scatterers)?)?;
    for (p, o) in sc.bs_positions.iter().zip(&sc.bs_orientations) {
        write_f64s(w, p)?;
        w.write_f64::<LE>(*o)?;
    }

    for (s, split) in ds.samples.iter().zip(&ds.split) {
        write_f64s(w, &s.position)?;
        w.write_u8(match split {
            Split::Calibration => 0,
            Split::Test => 1,
        })?;
        write_c32s(w, &s.uplink.data)?;
        for d in &s.downlink {
            write_c32s(w, &d.data)?;
        }
    }
    Ok(())
}

pub fn read_dataset(mut r: &[u8]) -> FResult<Dataset> {
    read_magic(&mut r, DATASET_MAGIC)?;
    let n_bs = read_count(&mut r)?;
    let n_a = read_count(&mut r)?;
    let n_s = read_count(&mut r)?;
    let n_v = read_count(&mut r)?;
    let n_h = read_count(&mut r)?;
    let n_ue = read_count(&mut r)?;
    let f_ul = r.read_f64::<LE>()?;
    let f_dl = r.read_f64::<LE>()?;
    let bandwidth = r.read_f64::<LE>()?;
    let seed = r.read_u64::<LE>()?;
    if n_v * n_h != n_a {
        return Err(FormatError::Invalid(format!("N_v * N_h = {} != N_a = {n_a}", n_v * n_h)));
    }
    let spacing = r.read_f64::<LE>()?;
    let ue_area = read_rect(&mut r)?;
    let ue_height = r.read_f64::<LE>()?;
    let scatterer_area = read_rect(&mut r)?;
    let scatterer_height = r.read_f64::<LE>()?;
    let n_scatterers = read_count(&mut r)?;
    let mut bs_positions = Vec::with_capacity(n_bs);
    let mut bs_orientations = Vec::with_capacity(n_bs);
    for _ in 0..n_bs {
        let p = read_f64s(&mut r, 3)?;
        bs_positions.push([p[0], p[1], p[2]]);
        bs_orientations.push(r.read_f64::<LE>()?);
    }
    let record = 3 * 8 + 1 + 8 * n_a * n_s * (1 + n_bs);
    if r.len() < record.saturating_mul(n_ue) {
        return Err(FormatError::Truncated);
    }
    let mut samples = Vec::with_capacity(n_ue);
    let mut split = Vec::with_capacity(n_ue);
    for _ in 0..n_ue {
        let p = read_f64s(&mut r, 3)?;
        split.push(match r.read_u8()? {
            0 => Split::Calibration,
            1 => Split::Test,
            t => return Err(FormatError::Invalid(format!("split tag {t}"))),
        });
        let uplink = ChannelTensor::from_data(n_a, n_s, read_c32s(&mut r, n_a * n_s)?)?;
        let downlink = (0..n_bs)
            .map(|_| Ok(ChannelTensor::from_data(n_a, n_s, read_c32s(&mut r, n_a * n_s)?)?))
            .collect::<FResult<Vec<_>>>()?;
        samples.push(ChannelSample { uplink, downlink, position: [p[0], p[1], p[2]] });
    }
    expect_end(r)?;
    let ds = Dataset {
        scene: SceneConfig {
            bs_positions,
            bs_orientations,
            ue_area,
            ue_height,
            n_ue,
            n_scatterers,
            scatterer_area,
            scatterer_height,
            rng_seed: seed,
        },
        uplink_carrier: CarrierConfig::new(f_ul, bandwidth, n_s),
        downlink_carrier: CarrierConfig::new(f_dl, bandwidth, n_s),
        array: ArrayConfig { n_v, n_h, element_spacing: (spacing != 0.0).then_some(spacing) },
        samples,
        split,
    };
    ds.validate()?;
    Ok(ds)
}

/// A chart together with the dataset indices of its calibration samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartFile {
    pub chart: Chart,
    pub sample_indices: Vec<usize>,
}

pub fn write_chart(w: &mut impl Write, file: &ChartFile) -> FResult<()> {
    let chart = &file.chart;
    if file.sample_indices.len() != chart.n_calibration() {
        return Err(FormatError::Invalid("one sample index per calibration channel required".into()));
    }
    write_magic(w, CHART_MAGIC)?;
    let p = &chart.params;
    for c in [p.n_neighbors, p.target_dim, p.oos_neighbors, chart.n_calibration(), chart.ambient_dim()] {
        w.write_u32::<LE>(count(c)?)?;
    }
    for &i in &file.sample_indices {
        w.write_u32::<LE>(count(i)?)?;
    }
    for h in &chart.cal_channels {
        write_c32s(w, h)?;
    }
    for z in &chart.cal_embedding {
        write_f64s(w, z)?;
    }
    Ok(())
}

pub fn read_chart(mut r: &[u8]) -> FResult<ChartFile> {
    read_magic(&mut r, CHART_MAGIC)?;
    let params = ChartParams {
        n_neighbors: read_count(&mut r)?,
        target_dim: read_count(&mut r)?,
        oos_neighbors: read_count(&mut r)?,
    };
    let n_cal = read_count(&mut r)?;
    let dim = read_count(&mut r)?;
    if r.len() < n_cal.saturating_mul(4 + 8 * dim + 8 * params.target_dim) {
        return Err(FormatError::Truncated);
    }
    let sample_indices = (0..n_cal).map(|_| read_count(&mut r)).collect::<FResult<Vec<_>>>()?;
    let channels = (0..n_cal).map(|_| read_c32s(&mut r, dim)).collect::<FResult<Vec<_>>>()?;
    let embedding = (0..n_cal).map(|_| read_f64s(&mut r, params.target_dim)).collect::<FResult<Vec<_>>>()?;
    expect_end(r)?;
    Ok(ChartFile { chart: Chart::from_parts(params, channels, embedding)?, sample_indices })
}

pub fn write_network(w: &mut impl Write, net: &Network) -> FResult<()> {
    write_magic(w, NETWORK_MAGIC)?;
    w.write_u8(match net.input_kind() {
        InputKind::Rff => 0,
        InputKind::Dense => 1,
    })?;
    w.write_u8(match net.head {
        HeadKind::Classification => 0,
        HeadKind::Regression => 1,
    })?;
    let dims = net.dims();
    for c in [dims.input_dim, dims.n_freq, dims.hidden, dims.n_out] {
        w.write_u32::<LE>(count(c)?)?;
    }
    let sigma = match &net.input {
        InputLayer::Rff(l) => l.sigma,
        InputLayer::Dense(_) => 0.0,
    };
    w.write_f64::<LE>(sigma)?;
    write_f64s(w, &net.scaling.shift)?;
    write_f64s(w, &net.scaling.scale)?;
    for block in net.param_blocks() {
        write_f64s(w, block)?;
    }
    Ok(())
}

pub fn read_network(mut r: &[u8]) -> FResult<Network> {
    read_magic(&mut r, NETWORK_MAGIC)?;
    let kind = match r.read_u8()? {
        0 => InputKind::Rff,
        1 => InputKind::Dense,
        k => return Err(FormatError::Invalid(format!("input kind {k}"))),
    };
    let head = match r.read_u8()? {
        0 => HeadKind::Classification,
        1 => HeadKind::Regression,
        k => return Err(FormatError::Invalid(format!("head kind {k}"))),
    };
    let d = read_count(&mut r)?;
    let f = read_count(&mut r)?;
    let t = read_count(&mut r)?;
    let n_out = read_count(&mut r)?;
    let sigma = r.read_f64::<LE>()?;
    let shift = read_f64s(&mut r, d)?;
    let scale = read_f64s(&mut r, d)?;
    let dense = |n_in: usize, n_out: usize, activation, r: &mut &[u8]| -> FResult<DenseLayer> {
        let weights = read_f64s(r, n_in * n_out)?;
        let biases = read_f64s(r, n_out)?;
        Ok(DenseLayer { n_in, n_out, weights, biases, activation })
    };
    let input = match kind {
        InputKind::Rff => InputLayer::Rff(RffLayer::new(f, d, read_f64s(&mut r, f * d)?, sigma)?),
        InputKind::Dense => InputLayer::Dense(dense(d, 2 * f, Activation::Relu, &mut r)?),
    };
    let hidden = dense(2 * f, t, Activation::Relu, &mut r)?;
    let out_width = match head {
        HeadKind::Classification => n_out,
        HeadKind::Regression => 2 * n_out,
    };
    let output = dense(t, out_width, Activation::Identity, &mut r)?;
    expect_end(r)?;
    Ok(Network { input, hidden, output, head, scaling: InputScaling { shift, scale } })
}

fn read_file(path: &Path) -> FResult<Vec<u8>> {
    std::fs::read(path).map_err(FormatError::Io)
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> FResult<()>) -> FResult<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(FormatError::Io)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> FResult<()> {
    write_file(path, |b| write_dataset(b, ds))
}

pub fn load_dataset(path: &Path) -> FResult<Dataset> {
    read_dataset(&read_file(path)?)
}

pub fn save_chart(file: &ChartFile, path: &Path) -> FResult<()> {
    write_file(path, |b| write_chart(b, file))
}

pub fn load_chart(path: &Path) -> FResult<ChartFile> {
    read_chart(&read_file(path)?)
}

pub fn save_network(net: &Network, path: &Path) -> FResult<()> {
    write_file(path, |b| write_network(b, net))
}

pub fn load_network(path: &Path) -> FResult<Network> {
    read_network(&read_file(path)?)
}
