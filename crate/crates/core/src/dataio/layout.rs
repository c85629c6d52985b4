//! Sensor layout and spatial neighbourhoods.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Channel identifiers with 2D sensor positions normalized to `[-1, 1]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLayout {
    ids: Vec<String>,
    positions: Vec<[f64; 2]>,
}

impl ChannelLayout {
    pub fn new(ids: Vec<String>, positions: Vec<[f64; 2]>) -> Result<Self> {
        if ids.len() != positions.len() {
            return Err(Error::LayoutLengthMismatch {
                expected: ids.len(),
                actual: positions.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate channel id `{id}`")));
            }
        }
        for (id, p) in ids.iter().zip(&positions) {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::NonFinite(format!("position of channel `{id}`")));
            }
        }
        Ok(Self { ids, positions })
    }

    /// Channels on concentric rings around the origin, inner ring first.
    ///
    /// Ring `r` (1-based) holds up to `6r` sensors; the outermost ring has
    /// radius 1 and takes whatever is left over.
    pub fn rings(n_channels: usize) -> Self {
        let mut capacities = Vec::new();
        let mut total = 0;
        let mut ring = 1;
        while total < n_channels {
            let cap = (6 * ring).min(n_channels - total);
            capacities.push(cap);
            total += cap;
            ring += 1;
        }
        let n_rings = capacities.len().max(1) as f64;
        let mut ids = Vec::with_capacity(n_channels);
        let mut positions = Vec::with_capacity(n_channels);
        for (r, &cap) in capacities.iter().enumerate() {
            let radius = (r + 1) as f64 / n_rings;
            // stagger alternate rings so neighbours are not radially aligned
            let phase = if r % 2 == 0 { 0.0 } else { std::f64::consts::PI / cap as f64 };
            for j in 0..cap {
                let angle = phase + 2.0 * std::f64::consts::PI * j as f64 / cap as f64;
                positions.push([radius * angle.cos(), radius * angle.sin()]);
                ids.push(format!("CH{:03}", ids.len()));
            }
        }
        Self { ids, positions }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::UnknownChannel(id.to_string()))
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.positions[a], self.positions[b]);
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }

    /// Channel `ch` followed by its `k - 1` nearest channels, by Euclidean
    /// distance with ties broken by ascending index.
    pub fn neighbourhood_indices(&self, ch: usize, k: usize) -> Result<Vec<usize>> {
        if ch >= self.len() {
            return Err(Error::UnknownChannel(format!("#{ch}")));
        }
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "neighbourhood size {k} outside 1..={}",
                self.len()
            )));
        }
        let mut others: Vec<usize> = (0..self.len()).filter(|&i| i != ch).collect();
        others.sort_by(|&a, &b| {
            self.distance(ch, a)
                .total_cmp(&self.distance(ch, b))
                .then(a.cmp(&b))
        });
        let mut out = Vec::with_capacity(k);
        out.push(ch);
        out.extend(others.into_iter().take(k - 1));
        Ok(out)
    }

    pub fn neighbourhood(&self, ch: &str, k: usize) -> Result<Vec<String>> {
        let idx = self.index_of(ch)?;
        Ok(self
            .neighbourhood_indices(idx, k)?
            .into_iter()
            .map(|i| self.ids[i].clone())
            .collect())
    }

    /// Indices of the `n` channels closest to `point`, nearest first.
    pub fn closest_to(&self, point: [f64; 2], n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let d = |i: usize| (self.positions[i][0] - point[0]).hypot(self.positions[i][1] - point[1]);
        idx.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }
}
