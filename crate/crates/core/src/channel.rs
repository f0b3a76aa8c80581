// SPDX-License-Identifier: Apache-2.0

//! Synthetic multi-BS multicarrier channels.
//!
//! Each BS carries a uniform planar array facing its boresight azimuth. The
//! channel between a BS and a single-antenna UE is the sum of a line-of-sight
//! path and one single-bounce path per point scatterer. Path amplitudes fall
//! off as the inverse of the travelled distance, scattered paths are further
//! attenuated by [`SCATTER_LOSS`] and carry a random phase fixed per
//! (BS, scatterer), so neighbouring UEs see similar channels.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{seed, Error, Result, C32, C64};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Amplitude factor applied to every scattered path.
pub const SCATTER_LOSS: f64 = 0.3;
/// Minimum BS-UE separation accepted by the channel model (m).
pub const MIN_DISTANCE: f64 = 0.1;

pub type Point3 = [f64; 3];

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        (self.x_min + u * (self.x_max - self.x_min), self.y_min + v * (self.y_max - self.y_min))
    }
}

/// Placement of base stations, UEs and scatterers.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub bs_positions: Vec<Point3>,
    /// Boresight azimuth of each BS array, radians from the x axis.
    pub bs_orientations: Vec<f64>,
    pub ue_area: Rect,
    pub ue_height: f64,
    pub n_ue: usize,
    pub n_scatterers: usize,
    pub scatterer_area: Rect,
    pub scatterer_height: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    /// Two BSs overlooking a 120 m x 120 m street area. BS1 sits on the
    /// south edge; BS2 is lower and closer to the UEs so its best beam varies
    /// quickly near it.
    fn default() -> Self {
        Self {
            bs_positions: vec![[0.0, 0.0, 15.0], [75.0, 80.0, 10.0]],
            bs_orientations: vec![PI / 2.0, PI],
            ue_area: Rect::new(-60.0, 60.0, 20.0, 140.0),
            ue_height: 1.5,
            n_ue: 2000,
            n_scatterers: 8,
            scatterer_area: Rect::new(-80.0, 80.0, 0.0, 160.0),
            scatterer_height: 6.0,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn n_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_positions.is_empty() {
            return Err(Error::InvalidConfig("at least one BS is required".into()));
        }
        if self.bs_orientations.len() != self.bs_positions.len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "{} BS orientations for {} BS positions",
                self.bs_orientations.len(),
                self.bs_positions.len()
            )));
        }
        if self.n_ue == 0 {
            return Err(Error::InvalidConfig("n_ue must be at least 1".into()));
        }
        for (name, r) in [("ue_area", &self.ue_area), ("scatterer_area", &self.scatterer_area)] {
            if !(r.x_max > r.x_min && r.y_max > r.y_min) || !r.area().is_finite() {
                return Err(Error::InvalidConfig(alloc::format!("{name} must have positive area")));
            }
        }
        let finite = self.bs_positions.iter().flatten().chain(&self.bs_orientations).all(|x| x.is_finite());
        if !finite || !self.ue_height.is_finite() || !self.scatterer_height.is_finite() {
            return Err(Error::NonFinite("scene configuration"));
        }
        for i in 0..self.bs_positions.len() {
            for j in i + 1..self.bs_positions.len() {
                if self.bs_positions[i] == self.bs_positions[j] {
                    return Err(Error::InvalidConfig(alloc::format!("BS {i} and BS {j} share a position")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierConfig {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub n_subcarriers: usize,
}

impl CarrierConfig {
    pub fn new(center_frequency: f64, bandwidth: f64, n_subcarriers: usize) -> Self {
        Self { center_frequency, bandwidth, n_subcarriers }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return Err(Error::InvalidConfig("center_frequency must be positive".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidConfig("bandwidth must be positive".into()));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::InvalidConfig("n_subcarriers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency
    }

    /// Frequency of subcarrier `s`, placed symmetrically around the center.
    pub fn subcarrier_frequency(&self, s: usize) -> f64 {
        let spacing = self.bandwidth / self.n_subcarriers as f64;
        self.center_frequency + (s as f64 - (self.n_subcarriers as f64 - 1.0) / 2.0) * spacing
    }

    /// Index of the subcarrier used for single-frequency precoding.
    pub fn central_subcarrier(&self) -> usize {
        self.n_subcarriers / 2
    }
}

/// Uniform planar array geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub n_v: usize,
    pub n_h: usize,
    /// Element spacing in meters; `None` means half a wavelength at
    /// whichever carrier the array is used on.
    pub element_spacing: Option<f64>,
}

impl ArrayConfig {
    pub fn new(n_v: usize, n_h: usize) -> Self {
        Self { n_v, n_h, element_spacing: None }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_v * self.n_h
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_v == 0 || self.n_h == 0 {
            return Err(Error::InvalidConfig("array dimensions must be at least 1".into()));
        }
        if let Some(d) = self.element_spacing {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidConfig("element_spacing must be positive".into()));
            }
        }
        Ok(())
    }

    fn spacing_in_wavelengths(&self, wavelength: f64) -> f64 {
        self.element_spacing.map_or(0.5, |d| d / wavelength)
    }
}

/// Array response toward (`azimuth`, `elevation`), relative to the array
/// boresight, normalized so every entry has modulus `1/sqrt(N_a)`.
///
/// Entry `v * n_h + h` carries the phase of vertical element `v` and
/// horizontal element `h`, the same vertical-major order as the Kronecker
/// product used by the codebook.
pub fn steering_vector(array: &ArrayConfig, azimuth: f64, elevation: f64, wavelength: f64) -> Result<Vec<C64>> {
    if !azimuth.is_finite() || !elevation.is_finite() {
        return Err(Error::NonFinite("steering angles"));
    }
    if !(wavelength > 0.0) {
        return Err(Error::InvalidConfig("wavelength must be positive".into()));
    }
    let u_h = elevation.cos() * azimuth.sin();
    let u_v = elevation.sin();
    Ok(steering_from_cosines(array, u_h, u_v, wavelength))
}

fn steering_from_cosines(array: &ArrayConfig, u_h: f64, u_v: f64, wavelength: f64) -> Vec<C64> {
    let delta = array.spacing_in_wavelengths(wavelength);
    let amp = 1.0 / (array.n_antennas() as f64).sqrt();
    let mut out = Vec::with_capacity(array.n_antennas());
    for v in 0..array.n_v {
        for h in 0..array.n_h {
            let phase = 2.0 * PI * delta * (v as f64 * u_v + h as f64 * u_h);
            out.push(C64::from_polar(amp, phase));
        }
    }
    out
}

/// Complex `N_a x N_s` tensor stored column-major: entry (antenna `a`,
/// subcarrier `s`) lives at `s * N_a + a`, so each subcarrier is a
/// contiguous antenna vector and the whole buffer is the vectorized channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    pub data: Vec<C32>,
}

impl ChannelTensor {
    pub fn zeros(n_antennas: usize, n_subcarriers: usize) -> Self {
        Self { n_antennas, n_subcarriers, data: vec![C32::new(0.0, 0.0); n_antennas * n_subcarriers] }
    }

    pub fn from_data(n_antennas: usize, n_subcarriers: usize, data: Vec<C32>) -> Result<Self> {
        if data.len() != n_antennas * n_subcarriers {
            return Err(Error::DimensionMismatch { expected: n_antennas * n_subcarriers, got: data.len() });
        }
        Ok(Self { n_antennas, n_subcarriers, data })
    }

    pub fn get(&self, antenna: usize, subcarrier: usize) -> C32 {
        self.data[subcarrier * self.n_antennas + antenna]
    }

    pub fn subcarrier(&self, s: usize) -> &[C32] {
        &self.data[s * self.n_antennas..(s + 1) * self.n_antennas]
    }

    /// One antenna vector per subcarrier, widened to 64 bits.
    pub fn subcarriers_c64(&self) -> Vec<Vec<C64>> {
        (0..self.n_subcarriers).map(|s| self.subcarrier_c64(s)).collect()
    }

    pub fn subcarrier_c64(&self, s: usize) -> Vec<C64> {
        self.subcarrier(s).iter().map(|z| C64::new(z.re.into(), z.im.into())).collect()
    }

    /// The vectorized channel of length `N_a * N_s`.
    pub fn vectorized_c64(&self) -> Vec<C64> {
        self.data.iter().map(|z| C64::new(z.re.into(), z.im.into())).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| f64::from(z.norm_sqr())).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Channels seen by one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    /// Uplink channel at BS1 (the charting BS).
    pub uplink: ChannelTensor,
    /// Downlink channel at every BS.
    pub downlink: Vec<ChannelTensor>,
    pub position: Point3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Calibration,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scene: SceneConfig,
    pub uplink_carrier: CarrierConfig,
    pub downlink_carrier: CarrierConfig,
    pub array: ArrayConfig,
    pub samples: Vec<ChannelSample>,
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn n_bs(&self) -> usize {
        self.scene.n_bs()
    }

    /// Length of the vectorized uplink channel, `N_a * N_s`.
    pub fn ambient_dim(&self) -> usize {
        self.array.n_antennas() * self.uplink_carrier.n_subcarriers
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        self.split.iter().enumerate().filter(|(_, s)| **s == which).map(|(i, _)| i).collect()
    }

    /// Check the shape and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        if self.split.len() != self.samples.len() {
            return Err(Error::DimensionMismatch { expected: self.samples.len(), got: self.split.len() });
        }
        let n_a = self.array.n_antennas();
        for s in &self.samples {
            let ul = &s.uplink;
            if ul.n_antennas != n_a || ul.n_subcarriers != self.uplink_carrier.n_subcarriers {
                return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got: ul.data.len() });
            }
            if s.downlink.len() != self.n_bs() {
                return Err(Error::DimensionMismatch { expected: self.n_bs(), got: s.downlink.len() });
            }
            for dl in &s.downlink {
                if dl.n_antennas != n_a || dl.n_subcarriers != self.downlink_carrier.n_subcarriers {
                    return Err(Error::DimensionMismatch {
                        expected: n_a * self.downlink_carrier.n_subcarriers,
                        got: dl.data.len(),
                    });
                }
            }
            if !ul.is_finite() || !s.downlink.iter().all(ChannelTensor::is_finite) {
                return Err(Error::NonFinite("channel sample"));
            }
        }
        Ok(())
    }
}

/// A fully realized scene: every random draw of a [`SceneConfig`] resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    pub bs_positions: Vec<Point3>,
    pub bs_orientations: Vec<f64>,
    pub ue_positions: Vec<Point3>,
    pub scatterers: Vec<Point3>,
    /// `scatter_phases[bs][k]`: phase of the bounce off scatterer `k` seen by `bs`.
    pub scatter_phases: Vec<Vec<f64>>,
}

impl SceneGeometry {
    pub fn realize(scene: &SceneConfig) -> Result<Self> {
        scene.validate()?;
        let mut ue_rng = seed::rng(seed::derive(scene.rng_seed, "ue_positions"));
        let ue_positions = (0..scene.n_ue)
            .map(|_| {
                let (x, y) = scene.ue_area.sample(&mut ue_rng);
                [x, y, scene.ue_height]
            })
            .collect();
        let mut sc_rng = seed::rng(seed::derive(scene.rng_seed, "scatterers"));
        let scatterers = (0..scene.n_scatterers)
            .map(|_| {
                let (x, y) = scene.scatterer_area.sample(&mut sc_rng);
                [x, y, scene.scatterer_height]
            })
            .collect();
        let mut ph_rng = seed::rng(seed::derive(scene.rng_seed, "scatter_phases"));
        let scatter_phases = (0..scene.n_bs())
            .map(|_| (0..scene.n_scatterers).map(|_| 2.0 * PI * ph_rng.random::<f64>()).collect())
            .collect();
        Ok(Self {
            bs_positions: scene.bs_positions.clone(),
            bs_orientations: scene.bs_orientations.clone(),
            ue_positions,
            scatterers,
            scatter_phases,
        })
    }

    /// Direction cosines (horizontal, vertical) of `target` in the array
    /// frame of BS `bs`.
    fn array_cosines(&self, bs: usize, target: &Point3) -> (f64, f64, f64) {
        let p = &self.bs_positions[bs];
        let d = [target[0] - p[0], target[1] - p[1], target[2] - p[2]];
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let phi = self.bs_orientations[bs];
        // horizontal array axis lies in the ground plane, normal to boresight
        let e_h = [-phi.sin(), phi.cos()];
        let u_h = (d[0] * e_h[0] + d[1] * e_h[1]) / dist;
        let u_v = d[2] / dist;
        (u_h, u_v, dist)
    }

    /// Channel between BS `bs` and UE `ue` on every subcarrier of `carrier`.
    pub fn channel(&self, array: &ArrayConfig, carrier: &CarrierConfig, bs: usize, ue: usize) -> Result<ChannelTensor> {
        if bs >= self.bs_positions.len() {
            return Err(Error::IndexOutOfRange { index: bs, len: self.bs_positions.len() });
        }
        if ue >= self.ue_positions.len() {
            return Err(Error::IndexOutOfRange { index: ue, len: self.ue_positions.len() });
        }
        let wavelength = carrier.wavelength();
        let ue_pos = &self.ue_positions[ue];

        // (gain, path length, steering vector) per path
        let mut paths: Vec<(C64, f64, Vec<C64>)> = Vec::with_capacity(1 + self.scatterers.len());
        let (u_h, u_v, los) = self.array_cosines(bs, ue_pos);
        if los < MIN_DISTANCE {
            return Err(Error::Collocated { bs, distance: los });
        }
        paths.push((C64::new(1.0 / los, 0.0), los, steering_from_cosines(array, u_h, u_v, wavelength)));
        for (k, sc) in self.scatterers.iter().enumerate() {
            let (u_h, u_v, d_bs) = self.array_cosines(bs, sc);
            let d_ue = distance(sc, ue_pos);
            if d_bs < MIN_DISTANCE || d_ue < MIN_DISTANCE {
                continue;
            }
            let length = d_bs + d_ue;
            let gain = C64::from_polar(SCATTER_LOSS / length, self.scatter_phases[bs][k]);
            paths.push((gain, length, steering_from_cosines(array, u_h, u_v, wavelength)));
        }

        let n_a = array.n_antennas();
        let mut out = ChannelTensor::zeros(n_a, carrier.n_subcarriers);
        let mut acc = vec![C64::new(0.0, 0.0); n_a];
        for s in 0..carrier.n_subcarriers {
            let f = carrier.subcarrier_frequency(s);
            acc.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for (gain, length, sv) in &paths {
                // reduce the delay phase modulo one cycle in f64 before the exponential
                let cycles = f * length / SPEED_OF_LIGHT;
                let phase = -2.0 * PI * (cycles - cycles.floor());
                let coeff = gain * C64::from_polar(1.0, phase);
                for (a, x) in acc.iter_mut().zip(sv) {
                    *a += coeff * x;
                }
            }
            for (dst, src) in out.data[s * n_a..(s + 1) * n_a].iter_mut().zip(&acc) {
                *dst = C32::new(src.re as f32, src.im as f32);
            }
        }
        Ok(out)
    }
}

fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Channel between BS `bs_index` and UE `ue_index` of a scene.
///
/// Realizes the whole scene from its seed; prefer [`SceneGeometry::channel`]
/// when synthesizing many channels.
pub fn synthesize_channel(
    scene: &SceneConfig,
    array: &ArrayConfig,
    carrier: &CarrierConfig,
    bs_index: usize,
    ue_index: usize,
) -> Result<ChannelTensor> {
    array.validate()?;
    carrier.validate()?;
    SceneGeometry::realize(scene)?.channel(array, carrier, bs_index, ue_index)
}

/// Uplink channels at BS1 on `ul`, downlink channels at every BS on `dl`,
/// and a seeded calibration/test split.
pub fn build_dataset(
    scene: &SceneConfig,
    array: &ArrayConfig,
    ul: &CarrierConfig,
    dl: &CarrierConfig,
    calibration_fraction: f64,
) -> Result<Dataset> {
    if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
        return Err(Error::InvalidConfig("calibration_fraction must lie in (0, 1)".into()));
    }
    array.validate()?;
    ul.validate()?;
    dl.validate()?;
    let geometry = SceneGeometry::realize(scene)?;
    let samples = (0..scene.n_ue)
        .map(|ue| {
            let uplink = geometry.channel(array, ul, 0, ue)?;
            let downlink = (0..scene.n_bs()).map(|bs| geometry.channel(array, dl, bs, ue)).collect::<Result<Vec<_>>>()?;
            Ok(ChannelSample { uplink, downlink, position: geometry.ue_positions[ue] })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_cal = ((calibration_fraction * scene.n_ue as f64).round() as usize).min(scene.n_ue);
    let mut order: Vec<usize> = (0..scene.n_ue).collect();
    order.shuffle(&mut seed::rng(seed::derive(scene.rng_seed, "split")));
    let mut split = vec![Split::Test; scene.n_ue];
    for &i in &order[..n_cal] {
        split[i] = Split::Calibration;
    }
    Ok(Dataset {
        scene: scene.clone(),
        uplink_carrier: *ul,
        downlink_carrier: *dl,
        array: *array,
        samples,
        split,
    })
}
