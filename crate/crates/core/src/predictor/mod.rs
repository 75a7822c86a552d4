//! Offline-trained forecaster of each server's next inter-arrival gap and
//! next compute demand.
//!
//! One encoder per server, trained on that server's own history with
//! per-series standardization and a joint two-output head.

mod encoder;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use encoder::{Encoder, EncoderCache, EncoderDims};

use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, Mat};
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub model_dim: usize,
    pub attention_heads: usize,
    pub encoder_layers: usize,
    pub feedforward_dim: usize,
    /// Past events fed as context.
    pub window_length: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            model_dim: 512,
            attention_heads: 4,
            encoder_layers: 1,
            feedforward_dim: 1024,
            window_length: 20,
            learning_rate: 1e-4,
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.attention_heads == 0 || self.model_dim % self.attention_heads != 0 {
            return Err(Error::Config("model_dim must be divisible by attention_heads".into()));
        }
        if self.window_length == 0 || self.encoder_layers == 0 || self.batch_size == 0 {
            return Err(Error::Config("window_length, encoder_layers and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    fn dims(&self) -> EncoderDims {
        EncoderDims {
            inputs: 2,
            model_dim: self.model_dim,
            heads: self.attention_heads,
            layers: self.encoder_layers,
            ff_dim: self.feedforward_dim,
            window: self.window_length,
            outputs: 2,
        }
    }
}

/// Per-feature standardization fitted on a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; 2],
    pub scale: [f64; 2],
}

impl Normalizer {
    pub fn fit(series: &[(f64, f64)]) -> Self {
        let n = series.len().max(1) as f64;
        let mean = [
            series.iter().map(|p| p.0).sum::<f64>() / n,
            series.iter().map(|p| p.1).sum::<f64>() / n,
        ];
        let var = |f: fn(&(f64, f64)) -> f64, mu: f64| series.iter().map(|p| (f(p) - mu) * (f(p) - mu)).sum::<f64>() / n;
        let sd = [libm::sqrt(var(|p| p.0, mean[0])), libm::sqrt(var(|p| p.1, mean[1]))];
        let scale = sd.map(|s| if s > 1e-12 { s } else { 1.0 });
        Self { mean, scale }
    }

    pub fn normalize(&self, x: (f64, f64)) -> [f64; 2] {
        [(x.0 - self.mean[0]) / self.scale[0], (x.1 - self.mean[1]) / self.scale[1]]
    }

    pub fn denormalize(&self, z: [f64; 2]) -> (f64, f64) {
        (z[0] * self.scale[0] + self.mean[0], z[1] * self.scale[1] + self.mean[1])
    }
}

/// Forecaster for one server's series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesModel {
    pub encoder: Encoder,
    pub norm: Normalizer,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

impl SeriesModel {
    fn window_matrix(&self, recent: &[(f64, f64)]) -> Mat {
        let w = self.encoder.dims.window;
        let tail = &recent[recent.len().saturating_sub(w)..];
        let mut m = Mat::zeros(w, 2);
        let pad = w - tail.len();
        if tail.is_empty() {
            return m;
        }
        for i in 0..w {
            let z = self.norm.normalize(tail[i.saturating_sub(pad)]);
            m.row_mut(i).copy_from_slice(&z);
        }
        m
    }

    /// Next `(inter-arrival, demand)`, clamped at zero. Short windows are
    /// padded by repeating their earliest observation; an empty window is
    /// read as the training means.
    pub fn predict(&self, recent: &[(f64, f64)]) -> (f64, f64) {
        let out = self.encoder.forward(&self.window_matrix(recent));
        let (gap, demand) = self.norm.denormalize([out[0], out[1]]);
        let clean = |v: f64| if v.is_finite() { v.max(0.0) } else { 0.0 };
        (clean(gap), clean(demand))
    }
}

/// Per-server forecasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub config: PredictorConfig,
    pub servers: Vec<SeriesModel>,
}

/// Forecast for every server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub next_interarrival: Vec<f64>,
    pub next_demand: Vec<f64>,
}

impl Prediction {
    /// All-zero forecast, used when the forecaster is disabled.
    pub fn zeros(num_servers: usize) -> Self {
        Self { next_interarrival: vec![0.0; num_servers], next_demand: vec![0.0; num_servers] }
    }

    pub fn len(&self) -> usize {
        self.next_demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.next_demand.is_empty()
    }
}

/// Train one model per server on `history[m]`, a time-ordered sequence of
/// `(inter-arrival, demand)` pairs.
pub fn train(history: &[Vec<(f64, f64)>], cfg: &PredictorConfig) -> Result<ForecastModel> {
    cfg.validate()?;
    let w = cfg.window_length;
    for (server, h) in history.iter().enumerate() {
        if h.len() <= w {
            return Err(Error::InsufficientHistory { server, len: h.len(), needed: w });
        }
    }
    let servers = history
        .iter()
        .enumerate()
        .map(|(server, h)| train_series(h, cfg, server as u64))
        .collect();
    Ok(ForecastModel { config: cfg.clone(), servers })
}

fn train_series(series: &[(f64, f64)], cfg: &PredictorConfig, server: u64) -> SeriesModel {
    let mut init = rng::seeded(cfg.seed, stream::PREDICTOR + 64 * (server + 1));
    let mut shuffle = rng::seeded(cfg.seed, stream::PREDICTOR + 64 * (server + 1) + 1);
    let norm = Normalizer::fit(series);
    let mut model = SeriesModel { encoder: Encoder::new(cfg.dims(), &mut init), norm, losses: Vec::new() };
    let w = cfg.window_length;
    let z: Vec<[f64; 2]> = series.iter().map(|&x| norm.normalize(x)).collect();
    let mut order: Vec<usize> = (w..z.len()).collect();
    let mut opt = Adam::new(model.encoder.num_params(), cfg.learning_rate);
    let mut grads = vec![0.0; model.encoder.num_params()];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let input = Mat::from_vec(w, 2, z[i - w..i].iter().flatten().copied().collect());
                let cache = model.encoder.forward_cached(&input);
                let out = Encoder::output(&cache);
                let err = [out[0] - z[i][0], out[1] - z[i][1]];
                epoch_loss += 0.5 * (err[0] * err[0] + err[1] * err[1]);
                let scale = 1.0 / batch.len() as f64;
                model.encoder.backward(&cache, &[err[0] * scale, err[1] * scale], &mut grads);
            }
            clip_grad_norm(&mut grads, 1.0);
            opt.step(&mut model.encoder.params, &grads);
        }
        model.losses.push(epoch_loss / order.len() as f64);
    }
    model
}

impl ForecastModel {
    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn window_length(&self) -> usize {
        self.config.window_length
    }

    /// Forecast every server from its recent `(inter-arrival, demand)` pairs.
    pub fn predict_next(&self, recent: &[Vec<(f64, f64)>]) -> Prediction {
        assert_eq!(recent.len(), self.servers.len(), "one window per server");
        let (gaps, demands) = self
            .servers
            .iter()
            .zip(recent)
            .map(|(m, r)| m.predict(r))
            .unzip();
        Prediction { next_interarrival: gaps, next_demand: demands }
    }

    /// One-step forecasts for positions `from..series.len()` of `series`,
    /// each using the events before it as context.
    pub fn rolling(&self, server: usize, series: &[(f64, f64)], from: usize) -> Vec<(f64, f64)> {
        (from..series.len())
            .map(|i| self.servers[server].predict(&series[..i]))
            .collect()
    }

    /// Held-out R² of the gap and demand forecasts over `series[from..]`.
    pub fn evaluate(&self, server: usize, series: &[(f64, f64)], from: usize) -> Result<(f64, f64)> {
        let pred = self.rolling(server, series, from);
        let truth = &series[from..];
        let pick = |f: fn(&(f64, f64)) -> f64, xs: &[(f64, f64)]| xs.iter().map(f).collect::<Vec<_>>();
        Ok((
            r2_score(&pick(|p| p.0, truth), &pick(|p| p.0, &pred))?,
            r2_score(&pick(|p| p.1, truth), &pick(|p| p.1, &pred))?,
        ))
    }
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2_score(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::UndefinedR2("length mismatch"));
    }
    if truth.len() < 2 {
        return Err(Error::UndefinedR2("need at least two points"));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2("constant truth"));
    }
    let ss_res: f64 = truth.iter().zip(predicted).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Trailing moving average; the first values average what is available.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny(epochs: usize) -> PredictorConfig {
        PredictorConfig {
            model_dim: 16,
            attention_heads: 4,
            encoder_layers: 1,
            feedforward_dim: 32,
            window_length: 8,
            learning_rate: 3e-3,
            epochs,
            batch_size: 16,
            seed: 1,
        }
    }

    #[test]
    fn r2_examples() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(r2_score(&t, &t).unwrap(), 1.0);
        assert_eq!(r2_score(&t, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(r2_score(&t, &[1.0, 2.0, 2.0]).unwrap(), 0.5, max_relative = 1e-12);
        assert!(r2_score(&[4.0, 4.0], &[4.0, 4.0]).is_err());
        assert!(r2_score(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn smooth_examples() {
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(smooth(&xs, 1), xs.to_vec());
        assert_eq!(smooth(&[2.5; 30], 20), vec![2.5; 30]);
        let mut spike = vec![0.0; 25];
        spike[24] = 20.0;
        let s = smooth(&spike, 20);
        assert_eq!(s.len(), 25);
        assert_relative_eq!(s[24], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn normalization_round_trips() {
        let series = [(0.3, 12.0), (1.7, 40.0), (0.9, 33.0)];
        let n = Normalizer::fit(&series);
        for &x in &series {
            let (a, b) = n.denormalize(n.normalize(x));
            assert_relative_eq!(a, x.0, max_relative = 1e-12);
            assert_relative_eq!(b, x.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn short_history_names_the_server() {
        let long = vec![(1.0, 1.0); 20];
        let short = vec![(1.0, 1.0); 8];
        match train(&[long, short], &tiny(1)) {
            Err(Error::InsufficientHistory { server, .. }) => assert_eq!(server, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_series_is_learned() {
        let series = vec![(0.5, 42.0); 200];
        let model = train(&[series.clone()], &tiny(3)).unwrap();
        let (gap, demand) = model.servers[0].predict(&series[..30]);
        assert!((gap - 0.5).abs() < 0.05 && (demand - 42.0).abs() < 4.2, "{gap} {demand}");
    }

    #[test]
    fn prediction_is_pure_and_handles_cold_start() {
        let series: Vec<(f64, f64)> = (0..100).map(|i| (1.0 + libm::sin(i as f64), 10.0 + i as f64 % 7.0)).collect();
        let model = train(&[series.clone(), series.clone()], &tiny(2)).unwrap();
        let windows = vec![Vec::new(), series[..3].to_vec()];
        let a = model.predict_next(&windows);
        let b = model.predict_next(&windows);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.next_interarrival.iter().chain(&a.next_demand).all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn training_loss_falls() {
        let series: Vec<(f64, f64)> = (0..300)
            .map(|i| (1.0 + 0.5 * libm::sin(i as f64 * 0.2), 20.0 + 10.0 * libm::cos(i as f64 * 0.15)))
            .collect();
        let model = train(&[series], &tiny(6)).unwrap();
        let l = &model.servers[0].losses;
        assert!(l.last().unwrap() < l.first().unwrap(), "{l:?}");
    }

    #[test]
    fn same_seed_same_model() {
        let series: Vec<(f64, f64)> = (0..60).map(|i| (1.0 + (i % 3) as f64, 5.0 + (i % 5) as f64)).collect();
        let a = train(&[series.clone()], &tiny(2)).unwrap();
        let b = train(&[series], &tiny(2)).unwrap();
        assert_eq!(a, b);
    }
}
