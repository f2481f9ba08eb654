//! Network geometry and random channel draws.
//!
//! Base stations sit on the vertices of a regular polygon whose adjacent
//! vertices are `2 * cell_radius` apart, so neighbouring cells touch. Users
//! are dropped uniformly by area over the annulus
//! `[min_distance, cell_radius]` around their own base station. Gains
//! follow the `30.6 + 36.7 log10(d)` dB pathloss law, optionally
//! multiplied by unit-mean exponential (Rayleigh power) fading.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, derive_seed, linear_to_db, GlobalIndexMap, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    /// Deterministic gains from distance alone.
    PathlossOnly,
    #[default]
    Rayleigh,
}

impl FadingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FadingMode::PathlossOnly => "pathloss-only",
            FadingMode::Rayleigh => "rayleigh",
        }
    }
}

impl std::str::FromStr for FadingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pathloss-only" | "pathloss" => Ok(FadingMode::PathlossOnly),
            "rayleigh" => Ok(FadingMode::Rayleigh),
            other => Err(format!("unknown fading mode {other:?} (expected rayleigh or pathloss-only)")),
        }
    }
}

/// Base station and user positions, users in flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub base_stations: Vec<Point>,
    pub users: Vec<Point>,
    pub index_map: GlobalIndexMap,
}

/// One base station per cell. A single cell sits at the origin; otherwise
/// the stations form a regular polygon with side `2 * cell_radius`.
pub fn place_base_stations(params: &SystemParams) -> Vec<Point> {
    let cells = params.num_cells();
    if cells <= 1 {
        return vec![Point::new(0.0, 0.0); cells];
    }
    let side = 2.0 * params.cell_radius_m;
    let circumradius = side / (2.0 * (PI / cells as f64).sin());
    (0..cells)
        .map(|m| {
            let angle = 2.0 * PI * m as f64 / cells as f64;
            Point::new(circumradius * angle.cos(), circumradius * angle.sin())
        })
        .collect()
}

/// Drops every user uniformly by area in the annulus around its own base station.
pub fn drop_users(base_stations: &[Point], params: &SystemParams, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index_map = params.index_map();
    let inner_sq = params.min_distance_m * params.min_distance_m;
    let outer_sq = params.cell_radius_m * params.cell_radius_m;
    let mut users = Vec::with_capacity(index_map.total_users());
    for (m, bs) in base_stations.iter().enumerate() {
        for _ in 0..index_map.cell_size(m) {
            let u: f64 = rng.random();
            let r = (inner_sq + u * (outer_sq - inner_sq)).sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            users.push(Point::new(bs.x + r * theta.cos(), bs.y + r * theta.sin()));
        }
    }
    Topology {
        base_stations: base_stations.to_vec(),
        users,
        index_map,
    }
}

/// Pathloss in dB at `distance_m` meters.
pub fn pathloss_db(distance_m: f64) -> f64 {
    30.6 + 36.7 * distance_m.log10()
}

/// Linear pathloss-only gain at `distance_m` meters.
pub fn pathloss_gain(distance_m: f64) -> f64 {
    db_to_linear(-pathloss_db(distance_m))
}

/// Gains between every user and every base station for one drop.
///
/// `gain(i, b)` is the power gain between flat user `i` and base station
/// `b`. Within each cell, the decoding order lists users by ascending
/// own-cell gain; the base station decodes them from the back (strongest
/// first).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    index_map: GlobalIndexMap,
    num_bs: usize,
    gains: Vec<f64>,
    decoding_order: Vec<Vec<usize>>,
    rank: Vec<usize>,
}

impl ChannelRealization {
    /// Wraps an explicit gain table: `gains[i][b]` for flat user `i` and
    /// base station `b`.
    pub fn from_gains(index_map: GlobalIndexMap, gains: Vec<Vec<f64>>) -> Result<Self> {
        let num_bs = index_map.num_cells();
        if gains.len() != index_map.total_users() {
            return Err(Error::DimensionMismatch {
                expected: index_map.total_users(),
                got: gains.len(),
            });
        }
        let mut flat = Vec::with_capacity(gains.len() * num_bs);
        for (user, row) in gains.iter().enumerate() {
            if row.len() != num_bs {
                return Err(Error::DimensionMismatch {
                    expected: num_bs,
                    got: row.len(),
                });
            }
            for (bs, &value) in row.iter().enumerate() {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidGain { user, bs, value });
                }
            }
            flat.extend_from_slice(row);
        }

        let mut decoding_order = Vec::with_capacity(num_bs);
        let mut rank = vec![0; index_map.total_users()];
        for m in 0..num_bs {
            let range = index_map.cell_range(m);
            let mut order: Vec<usize> = (0..range.len()).collect();
            // stable sort keeps the lower original index first on ties
            order.sort_by(|&a, &b| {
                let ga = flat[(range.start + a) * num_bs + m];
                let gb = flat[(range.start + b) * num_bs + m];
                ga.total_cmp(&gb)
            });
            for (pos, &n) in order.iter().enumerate() {
                rank[range.start + n] = pos;
            }
            decoding_order.push(order);
        }

        Ok(ChannelRealization {
            index_map,
            num_bs,
            gains: flat,
            decoding_order,
            rank,
        })
    }

    /// Draws a topology and a channel for `seed`.
    pub fn draw(params: &SystemParams, seed: u64, fading: FadingMode) -> Result<Self> {
        params.validate()?;
        let bs = place_base_stations(params);
        let topology = drop_users(&bs, params, derive_seed(seed, 0));
        realize_channel(&topology, params, derive_seed(seed, 1), fading)
    }

    pub fn index_map(&self) -> &GlobalIndexMap {
        &self.index_map
    }

    pub fn num_base_stations(&self) -> usize {
        self.num_bs
    }

    pub fn gain(&self, user: usize, bs: usize) -> f64 {
        self.gains[user * self.num_bs + bs]
    }

    /// Gain between a user and its own base station.
    pub fn own_gain(&self, user: usize) -> f64 {
        self.gain(user, self.index_map.cell_of(user))
    }

    /// Local user ids of cell `m` sorted by ascending own-cell gain.
    pub fn decoding_order(&self, cell: usize) -> &[usize] {
        &self.decoding_order[cell]
    }

    /// Position of flat user `user` in its cell's ascending-gain order.
    pub fn rank(&self, user: usize) -> usize {
        self.rank[user]
    }

    /// Copy with every gain toward base station `bs` from users of `cell`
    /// scaled by `factor`.
    pub fn scale_cell_block(&self, cell: usize, bs: usize, factor: f64) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = (0..self.index_map.total_users())
            .map(|i| (0..self.num_bs).map(|b| self.gain(i, b)).collect())
            .collect();
        for i in self.index_map.cell_range(cell) {
            rows[i][bs] *= factor;
        }
        ChannelRealization::from_gains(self.index_map.clone(), rows)
    }

    /// Writes one CSV row per (cell, user, base station) with the gain in
    /// linear and dB units. Ids are one-based.
    pub fn write_dump<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cell", "user", "bs", "gain_linear", "gain_db"])?;
        for i in 0..self.index_map.total_users() {
            let (m, n) = self.index_map.locate(i)?;
            for b in 0..self.num_bs {
                let g = self.gain(i, b);
                w.write_record(&[
                    (m + 1).to_string(),
                    (n + 1).to_string(),
                    (b + 1).to_string(),
                    format!("{g:e}"),
                    linear_to_db(g).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes gains from a complete topology.
pub fn realize_channel(
    topology: &Topology,
    params: &SystemParams,
    seed: u64,
    fading: FadingMode,
) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(topology.users.len());
    for (user, pos) in topology.users.iter().enumerate() {
        let mut row = Vec::with_capacity(topology.base_stations.len());
        for (bs, bs_pos) in topology.base_stations.iter().enumerate() {
            let d = pos.distance(bs_pos);
            if d < params.min_distance_m {
                return Err(Error::DistanceBelowMinimum {
                    user,
                    bs,
                    distance: d,
                    min: params.min_distance_m,
                });
            }
            let fade: f64 = match fading {
                FadingMode::PathlossOnly => 1.0,
                FadingMode::Rayleigh => rng.sample(Exp1),
            };
            row.push(pathloss_gain(d) * fade);
        }
        rows.push(row);
    }
    ChannelRealization::from_gains(topology.index_map.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_bs_at_origin() {
        let params = SystemParams {
            users_per_cell: vec![2],
            ..SystemParams::default()
        };
        assert_eq!(place_base_stations(&params), vec![Point::new(0.0, 0.0)]);
    }

    #[test]
    fn polygon_spacing() {
        let mut params = SystemParams {
            users_per_cell: vec![1, 1],
            ..SystemParams::default()
        };
        let bs = place_base_stations(&params);
        assert!((bs[0].distance(&bs[1]) - 200.0).abs() < 1e-9);

        params.users_per_cell = vec![3; 3];
        let bs = place_base_stations(&params);
        for a in 0..3 {
            for b in a + 1..3 {
                assert!((bs[a].distance(&bs[b]) - 200.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn drops_are_deterministic_and_inside_annulus() {
        let params = SystemParams::default();
        let bs = place_base_stations(&params);
        let a = drop_users(&bs, &params, 7);
        let b = drop_users(&bs, &params, 7);
        assert_eq!(a, b);
        for (i, u) in a.users.iter().enumerate() {
            let d = u.distance(&bs[a.index_map.cell_of(i)]);
            assert!((1.0..=100.0).contains(&d));
        }
    }

    #[test]
    fn mean_drop_distance() {
        let params = SystemParams {
            users_per_cell: vec![10_000],
            ..SystemParams::default()
        };
        let bs = place_base_stations(&params);
        let topo = drop_users(&bs, &params, 42);
        let mean = topo.users.iter().map(|u| u.distance(&bs[0])).sum::<f64>() / 10_000.0;
        let (big, small) = (100.0f64, 1.0f64);
        let expected = 2.0 / 3.0 * (big.powi(3) - small.powi(3)) / (big.powi(2) - small.powi(2));
        assert!((expected - 66.67).abs() < 0.01);
        assert!((mean - expected).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn pathloss_values() {
        assert!((pathloss_gain(1.0) - 8.710e-4).abs() < 1e-7);
        assert!((pathloss_gain(100.0) - 3.981e-11).abs() < 1e-14);
        assert!(pathloss_gain(10.0) > pathloss_gain(10.5));
    }

    #[test]
    fn rayleigh_mean_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn decoding_order_ascending_with_ties() {
        let map = GlobalIndexMap::new(&[4]);
        let ch = ChannelRealization::from_gains(map, vec![vec![3.0], vec![1.0], vec![3.0], vec![2.0]]).unwrap();
        assert_eq!(ch.decoding_order(0), &[1, 3, 0, 2]);
        assert_eq!(ch.rank(0), 2);
        assert_eq!(ch.rank(2), 3);
    }

    #[test]
    fn rejects_users_too_close() {
        let params = SystemParams {
            users_per_cell: vec![1],
            ..SystemParams::default()
        };
        let topo = Topology {
            base_stations: vec![Point::new(0.0, 0.0)],
            users: vec![Point::new(0.5, 0.0)],
            index_map: params.index_map(),
        };
        assert!(matches!(
            realize_channel(&topo, &params, 0, FadingMode::PathlossOnly),
            Err(Error::DistanceBelowMinimum { .. })
        ));
    }

    #[test]
    fn rejects_nonpositive_gain() {
        let map = GlobalIndexMap::new(&[1]);
        assert!(ChannelRealization::from_gains(map, vec![vec![0.0]]).is_err());
    }

    #[test]
    fn dump_has_row_per_link() {
        let params = SystemParams::default();
        let ch = ChannelRealization::draw(&params, 1, FadingMode::Rayleigh).unwrap();
        let mut buf = Vec::new();
        ch.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 9 * 3);
    }
}
