//! Geometry, large-scale path loss and Rayleigh small-scale fading.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, UserPlacement};
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// Version tag written into channel dumps.
pub const CHANNEL_FORMAT: &str = "aris-mec-channels/1";

const POSITION_STREAM: u64 = 0;
const FADING_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub ap: [f64; 3],
    pub ris: [f64; 3],
    pub users: Vec<[f64; 3]>,
    pub ris_ap_m: f64,
    pub user_ris_m: Vec<f64>,
    pub user_ap_m: Vec<f64>,
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Geometry {
    pub fn from_positions(ap: [f64; 3], ris: [f64; 3], users: Vec<[f64; 3]>) -> Self {
        let user_ris_m = users.iter().map(|u| distance(u, &ris)).collect();
        let user_ap_m = users.iter().map(|u| distance(u, &ap)).collect();
        Self {
            ap,
            ris,
            ris_ap_m: distance(&ris, &ap),
            users,
            user_ris_m,
            user_ap_m,
        }
    }
}

/// Places the AP, the RIS and the users. Random user drops depend only on
/// `seed`, so moving the RIS leaves the drops unchanged.
pub fn build_geometry(cfg: &ScenarioConfig, seed: u64) -> Geometry {
    let pos = &cfg.positions;
    let users = match &pos.users {
        UserPlacement::Fixed { positions } => positions.clone(),
        UserPlacement::Uniform {
            center_xy,
            side_m,
            height_m,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(POSITION_STREAM);
            (0..cfg.num_users())
                .map(|_| {
                    let dx: f64 = rng.random::<f64>() - 0.5;
                    let dy: f64 = rng.random::<f64>() - 0.5;
                    [
                        center_xy[0] + side_m * dx,
                        center_xy[1] + side_m * dy,
                        *height_m,
                    ]
                })
                .collect()
        }
    };
    Geometry::from_positions(pos.ap, pos.ris, users)
}

/// Path loss in dB: `−10 α log10(d) − 30`.
pub fn path_loss_db(distance_m: f64, exponent: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    Ok(-10.0 * exponent * distance_m.log10() - 30.0)
}

pub fn path_loss_linear(distance_m: f64, exponent: f64) -> Result<f64> {
    Ok(10f64.powf(path_loss_db(distance_m, exponent)? / 10.0))
}

/// Mean power gain of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub ris_ap: f64,
    pub user_ris: Vec<f64>,
    pub user_ap: Vec<f64>,
}

impl LinkGains {
    pub fn from_geometry(geom: &Geometry, cfg: &ScenarioConfig) -> Result<Self> {
        let pl = &cfg.path_loss;
        Ok(Self {
            ris_ap: path_loss_linear(geom.ris_ap_m, pl.ris_ap)?,
            user_ris: geom
                .user_ris_m
                .iter()
                .map(|&d| path_loss_linear(d, pl.user_ris))
                .collect::<Result<_>>()?,
            user_ap: geom
                .user_ap_m
                .iter()
                .map(|&d| path_loss_linear(d, pl.user_ap))
                .collect::<Result<_>>()?,
        })
    }
}

/// `H` (RIS→AP), `h_k` (user→RIS) and `g_k` (user→AP).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub ris_to_ap: CMatrix,
    pub user_to_ris: Vec<CVector>,
    pub user_to_ap: Vec<CVector>,
}

impl ChannelSet {
    pub fn num_antennas(&self) -> usize {
        self.ris_to_ap.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.ris_to_ap.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.user_to_ris.len()
    }

    pub fn check_dims(&self, n: usize, m: usize, k: usize) -> Result<()> {
        let ok = self.num_antennas() == n
            && self.num_elements() == m
            && self.user_to_ris.len() == k
            && self.user_to_ap.len() == k
            && self.user_to_ris.iter().all(|h| h.len() == m)
            && self.user_to_ap.iter().all(|g| g.len() == n);
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "channel dimensions do not match N={n}, M={m}, K={k}"
            )));
        }
        let finite = self.ris_to_ap.iter().all(|v| v.is_finite())
            && self.user_to_ris.iter().flatten().all(|v| v.is_finite())
            && self.user_to_ap.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite channel entry".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ChannelDump::from(self)).expect("channels serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ChannelDump = serde_json::from_str(text)?;
        dump.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn cn_sample(rng: &mut impl Rng, std: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * (std * std::f64::consts::FRAC_1_SQRT_2)
}

/// Draws i.i.d. CN(0, 1) fading scaled by the square root of each link gain.
/// The draw order (H column-major, then every h_k, then every g_k) is fixed.
pub fn synthesize_with_gains(
    gains: &LinkGains,
    num_antennas: usize,
    num_elements: usize,
    seed: u64,
) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FADING_STREAM);
    let h_std = gains.ris_ap.sqrt();
    let ris_to_ap = CMatrix::from_fn(num_antennas, num_elements, |_, _| {
        cn_sample(&mut rng, h_std)
    });
    let user_to_ris = gains
        .user_ris
        .iter()
        .map(|g| {
            let s = g.sqrt();
            CVector::from_fn(num_elements, |_, _| cn_sample(&mut rng, s))
        })
        .collect();
    let user_to_ap = gains
        .user_ap
        .iter()
        .map(|g| {
            let s = g.sqrt();
            CVector::from_fn(num_antennas, |_, _| cn_sample(&mut rng, s))
        })
        .collect();
    ChannelSet {
        ris_to_ap,
        user_to_ris,
        user_to_ap,
    }
}

pub fn synthesize_channels(geom: &Geometry, cfg: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    let gains = LinkGains::from_geometry(geom, cfg)?;
    Ok(synthesize_with_gains(
        &gains,
        cfg.num_antennas,
        cfg.num_elements,
        seed,
    ))
}

/// Geometry and channels for one Monte-Carlo drop.
pub fn draw(cfg: &ScenarioConfig, seed: u64) -> Result<(Geometry, ChannelSet)> {
    let geom = build_geometry(cfg, seed);
    let channels = synthesize_channels(&geom, cfg, seed)?;
    Ok((geom, channels))
}

#[derive(Serialize, Deserialize)]
struct ChannelDump {
    format: String,
    num_antennas: usize,
    num_elements: usize,
    /// Row-major `[re, im]` pairs.
    ris_to_ap: Vec<[f64; 2]>,
    user_to_ris: Vec<Vec<[f64; 2]>>,
    user_to_ap: Vec<Vec<[f64; 2]>>,
}

fn pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn unpairs(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
}

impl From<&ChannelSet> for ChannelDump {
    fn from(c: &ChannelSet) -> Self {
        let (n, m) = c.ris_to_ap.shape();
        let mut h = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                let v = c.ris_to_ap[(i, j)];
                h.push([v.re, v.im]);
            }
        }
        Self {
            format: CHANNEL_FORMAT.into(),
            num_antennas: n,
            num_elements: m,
            ris_to_ap: h,
            user_to_ris: c.user_to_ris.iter().map(pairs).collect(),
            user_to_ap: c.user_to_ap.iter().map(pairs).collect(),
        }
    }
}

impl TryFrom<ChannelDump> for ChannelSet {
    type Error = Error;

    fn try_from(d: ChannelDump) -> Result<Self> {
        if d.format != CHANNEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported channel format `{}`",
                d.format
            )));
        }
        let (n, m) = (d.num_antennas, d.num_elements);
        if d.ris_to_ap.len() != n * m {
            return Err(Error::InvalidArgument("H has the wrong size".into()));
        }
        let ris_to_ap = CMatrix::from_fn(n, m, |i, j| {
            let p = d.ris_to_ap[i * m + j];
            C64::new(p[0], p[1])
        });
        let set = ChannelSet {
            ris_to_ap,
            user_to_ris: d.user_to_ris.iter().map(|v| unpairs(v)).collect(),
            user_to_ap: d.user_to_ap.iter().map(|v| unpairs(v)).collect(),
        };
        set.check_dims(n, m, set.user_to_ris.len())?;
        Ok(set)
    }
}
