use crate::dataio::ChannelLayout;
use crate::error::{Error, Result};

/// One epoch: a channels × time matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    n_channels: usize,
    n_times: usize,
    data: Vec<f32>,
}

impl Trial {
    pub fn new(n_channels: usize, n_times: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n_channels * n_times {
            return Err(Error::Shape(format!(
                "trial buffer has {} values, expected {n_channels}×{n_times}",
                data.len()
            )));
        }
        Ok(Self {
            n_channels,
            n_times,
            data,
        })
    }

    pub fn zeros(n_channels: usize, n_times: usize) -> Self {
        Self {
            n_channels,
            n_times,
            data: vec![0.0; n_channels * n_times],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, ch: usize, t: usize) -> f32 {
        self.data[ch * self.n_times + t]
    }

    pub fn row(&self, ch: usize) -> &[f32] {
        &self.data[ch * self.n_times..(ch + 1) * self.n_times]
    }

    pub fn row_mut(&mut self, ch: usize) -> &mut [f32] {
        &mut self.data[ch * self.n_times..(ch + 1) * self.n_times]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Epoched multi-subject data, indexed `[subject][class][trial]`.
///
/// Class counts are balanced: every (subject, class) cell holds the same
/// number of trials, and every trial has the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochedDataset {
    pub subjects: Vec<String>,
    pub n_classes: usize,
    pub sfreq: f64,
    /// Seconds of pre-stimulus baseline at the start of every epoch.
    pub t_offset: f64,
    pub layout: ChannelLayout,
    trials: Vec<Vec<Vec<Trial>>>,
}

impl EpochedDataset {
    pub fn new(
        subjects: Vec<String>,
        n_classes: usize,
        sfreq: f64,
        t_offset: f64,
        layout: ChannelLayout,
        trials: Vec<Vec<Vec<Trial>>>,
    ) -> Result<Self> {
        let ds = Self {
            subjects,
            n_classes,
            sfreq,
            t_offset,
            layout,
            trials,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::Shape("dataset has no subjects".into()));
        }
        if self.n_classes == 0 {
            return Err(Error::Shape("dataset has no classes".into()));
        }
        if !(self.sfreq.is_finite() && self.sfreq > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling rate {}", self.sfreq)));
        }
        if self.trials.len() != self.subjects.len() {
            return Err(Error::Shape(format!(
                "{} subject ids but {} subject trial blocks",
                self.subjects.len(),
                self.trials.len()
            )));
        }
        let per_class = self.trials[0].first().map_or(0, Vec::len);
        if per_class == 0 {
            return Err(Error::Shape("empty (subject, class) cell".into()));
        }
        let c = self.layout.len();
        let t = self.trials[0][0][0].n_times();
        for (s, by_class) in self.trials.iter().enumerate() {
            if by_class.len() != self.n_classes {
                return Err(Error::Shape(format!(
                    "subject {} has {} classes, expected {}",
                    self.subjects[s],
                    by_class.len(),
                    self.n_classes
                )));
            }
            for (k, trials) in by_class.iter().enumerate() {
                if trials.len() != per_class {
                    return Err(Error::Shape(format!(
                        "subject {} class {k} has {} trials, expected {per_class} (classes must be balanced)",
                        self.subjects[s],
                        trials.len()
                    )));
                }
                for tr in trials {
                    if tr.n_channels() != c || tr.n_times() != t {
                        return Err(Error::Shape(format!(
                            "trial of subject {} class {k} is {}×{}, expected {c}×{t}",
                            self.subjects[s],
                            tr.n_channels(),
                            tr.n_times()
                        )));
                    }
                    if !tr.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "trial of subject {} class {k}",
                            self.subjects[s]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_channels(&self) -> usize {
        self.layout.len()
    }

    pub fn n_timesteps(&self) -> usize {
        self.trials[0][0][0].n_times()
    }

    pub fn trials_per_class(&self) -> usize {
        self.trials[0][0].len()
    }

    pub fn trials(&self, subject: usize, class: usize) -> &[Trial] {
        &self.trials[subject][class]
    }

    pub fn trial(&self, subject: usize, class: usize, index: usize) -> &Trial {
        &self.trials[subject][class][index]
    }

    /// Mutable access to every trial of one subject, `[class][trial]`.
    pub fn subject_trials_mut(&mut self, subject: usize) -> &mut [Vec<Trial>] {
        &mut self.trials[subject]
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subjects.iter().position(|s| s == id)
    }

    /// Time (s, relative to stimulus onset) of sample `t`.
    pub fn time_of(&self, t: usize) -> f64 {
        t as f64 / self.sfreq - self.t_offset
    }

    /// Keep only the listed subjects, in the given order.
    pub fn select_subjects(&self, subjects: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(subjects.len());
        let mut trials = Vec::with_capacity(subjects.len());
        for &s in subjects {
            if s >= self.n_subjects() {
                return Err(Error::InvalidArgument(format!("subject index {s} out of range")));
            }
            ids.push(self.subjects[s].clone());
            trials.push(self.trials[s].clone());
        }
        Self::new(ids, self.n_classes, self.sfreq, self.t_offset, self.layout.clone(), trials)
    }
}
