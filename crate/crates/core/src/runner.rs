//! Experiment orchestration: configuration, the per-iteration pipeline,
//! persistence and sweeps.
//!
//! One iteration: every worker computes its local gradient, packs it into
//! complex symbols, segments and OFDM-modulates it, and (optionally)
//! DAC-quantizes each word. Each word then crosses a freshly drawn channel to
//! all `K` antennas, where it is (optionally) ADC-quantized, demodulated and
//! combined with perfect CSI. The recovered gradient drives the optimizer.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelProfile};
use crate::dataset::{self, Dataset, SyntheticSpec};
use crate::learner::{self, DatasetShard, OptimizerConfig, OptimizerState, SoftmaxModel};
use crate::ofdm::{self, Modem, OfdmWord};
use crate::par::{self, Exec};
use crate::quantizer::{self, Converter};
use crate::receiver::{self, FreqResponses, Instrumentation, ScenarioKind};
use crate::rng::{Stream, Streams};
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "iteration,test_accuracy,train_loss,grad_est_rel_err,scenario,K,M,dac_bits,adc_bits,noise_var,seed";

pub const TERMS_HEADER: &str = "iteration,signal,interference,distortion,second_distortion,noise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
}

impl DatasetSource {
    /// Returns `(train, test)`.
    pub fn load(&self, streams: &Streams) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSource::Synthetic(spec) => spec.generate(streams),
            DatasetSource::Mnist { train_images, train_labels, test_images, test_labels, train_limit, test_limit } => {
                let train = dataset::load_mnist(train_images, train_labels)?;
                let test = dataset::load_mnist(test_images, test_labels)?;
                Ok((train.head(train_limit.unwrap_or(usize::MAX)), test.head(test_limit.unwrap_or(usize::MAX))))
            }
        }
    }
}

/// One experiment. Missing fields take the defaults below, which are the
/// reference setup (M = 20, L = 3 taps at 0/500/1000, N = N_cp = 1024,
/// σ_z² = 8·10⁻⁴, B = 1000, Adam at the PS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    /// Workers M.
    pub workers: usize,
    /// PS antennas K.
    pub antennas: usize,
    /// Subcarriers N.
    pub subcarriers: usize,
    /// Cyclic prefix N_cp.
    pub cyclic_prefix: usize,
    /// Taps, delays, tap variances and σ_z²; L is the number of taps.
    pub channel: ChannelProfile,
    pub optimizer: OptimizerConfig,
    /// Iterations T.
    pub iterations: usize,
    pub eval_every: usize,
    pub dataset: DatasetSource,
    /// Examples cached per worker, B.
    pub shard_size: usize,
    /// Per-iteration batch drawn from the cache; `None` uses the whole cache.
    pub batch_size: Option<usize>,
    pub overlap_shards: bool,
    pub init_std: f64,
    pub seed: u64,
    /// Bypass the channel: the PS receives the exact mean gradient.
    pub error_free_link: bool,
    /// Record the five-term decomposition every iteration.
    pub record_terms: bool,
    /// Run every loop sequentially.
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::InfiniteResolution,
            workers: 20,
            antennas: 40,
            subcarriers: 1024,
            cyclic_prefix: 1024,
            channel: ChannelProfile::uniform_three_tap(),
            optimizer: OptimizerConfig::default(),
            iterations: 300,
            eval_every: 10,
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            shard_size: 1000,
            batch_size: None,
            overlap_shards: false,
            init_std: 0.01,
            seed: 0,
            error_free_link: false,
            record_terms: false,
            deterministic: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.antennas == 0 {
            return Err(Error::config("M and K must be at least 1"));
        }
        if self.iterations == 0 || self.eval_every == 0 {
            return Err(Error::config("iterations and eval_every must be at least 1"));
        }
        if self.subcarriers == 0 || self.cyclic_prefix > self.subcarriers {
            return Err(Error::config(format!(
                "need N ≥ 1 and N_cp ≤ N, got N = {}, N_cp = {}",
                self.subcarriers, self.cyclic_prefix
            )));
        }
        self.channel.validate(self.cyclic_prefix)?;
        for bits in [self.scenario.dac_bits(), self.scenario.adc_bits()].into_iter().flatten() {
            if !(quantizer::MIN_BITS..=quantizer::MAX_BITS).contains(&bits) {
                return Err(Error::config(format!(
                    "converter resolution {bits} outside {}..={} bits",
                    quantizer::MIN_BITS,
                    quantizer::MAX_BITS
                )));
            }
        }
        if self.shard_size == 0 {
            return Err(Error::config("shard_size must be positive"));
        }
        if let Some(b) = self.batch_size {
            if b == 0 || b > self.shard_size {
                return Err(Error::config(format!("batch_size {b} must lie in 1..={}", self.shard_size)));
            }
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::config("init_std must be non-negative"));
        }
        self.optimizer.validate()?;
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.deterministic {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    /// File stem for this run's outputs.
    pub fn run_name(&self) -> String {
        format!("{}_M{}_K{}_seed{}", self.scenario.tag(), self.workers, self.antennas, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based; the record describes the state after this many updates.
    pub iteration: usize,
    /// Only on evaluation iterations.
    pub test_accuracy: Option<f64>,
    /// Mean local loss at the parameters the gradients were computed on.
    pub train_loss: f64,
    /// `‖ĝ − ḡ‖ / ‖ḡ‖` against the exact mean gradient.
    pub grad_est_rel_err: f64,
    pub grad_est_err_norm: f64,
    pub wall_time_s: f64,
}

fn bits_field(bits: Option<u32>) -> String {
    bits.map_or_else(|| "inf".to_string(), |b| b.to_string())
}

impl IterationRecord {
    pub fn csv_row(&self, config: &ExperimentConfig) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            self.iteration,
            self.test_accuracy.map_or_else(String::new, |a| a.to_string()),
            self.train_loss,
            self.grad_est_rel_err,
            config.scenario.name(),
            config.antennas,
            config.workers,
            bits_field(config.scenario.dac_bits()),
            bits_field(config.scenario.adc_bits()),
            config.channel.noise_variance,
            config.seed,
        )
    }
}

/// Mean power of each combiner term over all subcarriers of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermPowers {
    pub iteration: usize,
    pub signal: f64,
    pub interference: f64,
    pub distortion: f64,
    pub second_distortion: f64,
    pub noise: f64,
}

impl TermPowers {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}\n",
            self.iteration, self.signal, self.interference, self.distortion, self.second_distortion, self.noise
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<IterationRecord>,
    pub terms: Vec<TermPowers>,
    /// Mean of the per-antenna, per-word distortion factors measured at the ADCs.
    pub measured_adc_eta: Option<f64>,
    pub theta: Vec<f64>,
}

impl RunOutput {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.test_accuracy)
    }
}

/// The over-the-air link from M workers to the PS.
pub struct OtaLink<'a> {
    config: &'a ExperimentConfig,
    streams: Streams,
    modem: Modem,
    dac: Converter,
    adc: Converter,
    exec: Exec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutput {
    /// Recovered mean-gradient estimate.
    pub g_hat: Vec<f64>,
    /// Distortion factor measured on every (word, antenna) ADC block.
    pub adc_eta: Vec<f64>,
    /// Mean powers of signal, interference, the two DAC distortion terms and
    /// noise, when `record_terms` is set.
    pub terms: Option<[f64; 5]>,
}

/// A worker's word after the (possibly quantizing) DAC.
struct TxWord {
    word: OfdmWord,
    symbols: Vec<Complex64>,
    distortion: Option<Vec<Complex64>>,
}

impl<'a> OtaLink<'a> {
    pub fn new(config: &'a ExperimentConfig, streams: Streams) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            streams,
            modem: Modem::new(config.subcarriers, config.cyclic_prefix)?,
            dac: Converter::from_bits(config.scenario.dac_bits())?,
            adc: Converter::from_bits(config.scenario.adc_bits())?,
            exec: config.exec(),
        })
    }

    fn transmitter(&self, g: &[f64]) -> Result<Vec<TxWord>> {
        let symbols = ofdm::pack_gradient(g)?;
        let n_cp = self.modem.n_cp();
        let n = self.modem.n();
        ofdm::segment(&symbols, n)?
            .into_iter()
            .map(|seg| {
                let mut word = self.modem.modulate(&seg.values)?;
                let mut distortion = None;
                if let Some(spec) = self.dac.spec() {
                    let clean = self.config.record_terms.then(|| word.body().to_vec());
                    quantizer::quantize_block(spec, word.body_mut());
                    word.samples.copy_within(n..n + n_cp, 0);
                    if let Some(clean) = clean {
                        let gain = 1.0 - spec.eta();
                        let mut q: Vec<Complex64> = word.body().iter().zip(&clean).map(|(a, b)| a - gain * b).collect();
                        self.modem.dft().forward(&mut q);
                        distortion = Some(q);
                    }
                }
                Ok(TxWord { word, symbols: seg.values, distortion })
            })
            .collect()
    }

    /// Sends one gradient per worker through iteration `t`'s channels.
    pub fn run(&self, t: usize, grads: &[Vec<f64>]) -> Result<LinkOutput> {
        let config = self.config;
        if grads.len() != config.workers || grads.iter().any(|g| g.is_empty() || g.len() != grads[0].len()) {
            return Err(Error::invalid(format!("need {} equal-length gradients", config.workers)));
        }
        let (m_count, k_count) = (config.workers, config.antennas);
        let d = grads[0].len();
        let per_worker =
            par::map_slice(self.exec, grads, |g| self.transmitter(g)).into_iter().collect::<Result<Vec<_>>>()?;
        let words = ofdm::words_for(d, self.modem.n());
        let mut by_word: Vec<Vec<TxWord>> = (0..words).map(|_| Vec::with_capacity(m_count)).collect();
        for worker in per_worker {
            for (w, tx) in worker.into_iter().enumerate() {
                by_word[w].push(tx);
            }
        }

        let eta = self.dac.eta();
        let eta_k = vec![self.adc.eta(); k_count];
        let mut combined = Vec::with_capacity(words);
        let mut adc_eta = Vec::new();
        let mut term_acc = self.config.record_terms.then_some([0.0; 5]);
        for (w, txs) in by_word.into_iter().enumerate() {
            let keys = [t as u64, w as u64];
            let realization =
                channel::draw_realization_keyed(&config.channel, m_count, k_count, &self.streams, &keys, self.exec);
            let tx_words: Vec<OfdmWord> = txs.iter().map(|tx| tx.word.clone()).collect();
            let received = channel::transmit(&tx_words, &realization, config.channel.noise_variance, self.exec, |k| {
                self.streams.rng(Stream::Noise, &[t as u64, w as u64, k as u64])
            })?;
            let bodies = received
                .iter()
                .map(|r| self.modem.remove_cp(r).map(<[Complex64]>::to_vec))
                .collect::<Result<Vec<_>>>()?;
            let (bodies, measured) = receiver::adc_quantize(&bodies, &self.adc, self.exec)?;
            if self.adc.spec().is_some() {
                adc_eta.extend(measured);
            }
            let r = par::map_slice(self.exec, &bodies, |b| self.modem.demodulate(b))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let h = FreqResponses::from_realization(&realization, self.modem.dft(), self.exec);
            let y = match config.scenario {
                ScenarioKind::InfiniteResolution => receiver::combine_dac(&r, &h, 0.0)?,
                ScenarioKind::DacOnly { .. } => receiver::combine_dac(&r, &h, eta)?,
                ScenarioKind::AdcOnly { .. } => receiver::combine_adc(&r, &h, &eta_k)?,
                ScenarioKind::Joint { .. } => receiver::combine_joint(&r, &h, eta, &eta_k)?,
            };
            if let Some(acc) = term_acc.as_mut() {
                let mut symbols = Vec::with_capacity(m_count);
                let mut distortion = self.dac.spec().map(|_| Vec::with_capacity(m_count));
                for tx in txs {
                    symbols.push(tx.symbols);
                    if let (Some(all), Some(q)) = (distortion.as_mut(), tx.distortion) {
                        all.push(q);
                    }
                }
                let inst = Instrumentation { symbols, dac_distortion: distortion, received: r };
                let terms = receiver::decompose_terms(Some(&inst), &h, eta, &eta_k)?;
                let power = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>() / v.len() as f64;
                for (a, v) in acc.iter_mut().zip([
                    &terms.signal,
                    &terms.interference,
                    &terms.distortion,
                    &terms.second_distortion,
                    &terms.noise,
                ]) {
                    *a += power(v) / words as f64;
                }
            }
            combined.push(y);
        }
        let g_hat = receiver::recover_gradient(&combined, m_count, config.channel.sigma_h_sq(), d)?;
        Ok(LinkOutput { g_hat, adc_eta, terms: term_acc })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs one experiment, handing each record to `on_record` as soon as it is
/// complete. On divergence the records so far have been delivered and
/// [`Error::Diverged`] is returned.
pub fn run_experiment_with<F>(config: &ExperimentConfig, mut on_record: F) -> Result<RunOutput>
where
    F: FnMut(&IterationRecord, Option<&TermPowers>) -> Result<()>,
{
    config.validate()?;
    let streams = Streams::new(config.seed);
    let exec = config.exec();
    let (train, test) = config.dataset.load(&streams)?;
    let model = SoftmaxModel::for_dataset(&train);
    if test.dim() != train.dim() || test.classes() != train.classes() {
        return Err(Error::config("train and test sets have different shapes"));
    }
    let shards = learner::shard_dataset(
        &train,
        config.workers,
        config.shard_size,
        config.overlap_shards,
        &mut streams.rng(Stream::Shard, &[]),
    )?;
    let batch = config.batch_size.unwrap_or(config.shard_size);
    let mut theta = model.init_params(config.init_std, &mut streams.rng(Stream::ModelInit, &[]));
    let mut optimizer = OptimizerState::new(config.optimizer, model.dim());
    let link = OtaLink::new(config, streams)?;

    let mut out = RunOutput { records: Vec::new(), terms: Vec::new(), measured_adc_eta: None, theta: Vec::new() };
    let mut eta_sum = (0.0, 0usize);
    let start = Instant::now();
    for t in 0..config.iterations {
        let iteration = t + 1;
        let local = par::map_slice(exec, &shards, |shard: &DatasetShard<'_>| {
            let mut rng = streams.rng(Stream::Batch, &[t as u64, shard.owner as u64]);
            learner::local_gradient(&model, &theta, shard, batch, &mut rng)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (grads, losses): (Vec<Vec<f64>>, Vec<f64>) = local.into_iter().unzip();
        let inv_m = 1.0 / config.workers as f64;
        let mut mean = vec![0.0; model.dim()];
        for g in &grads {
            mean.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        mean.iter_mut().for_each(|a| *a *= inv_m);
        let train_loss = losses.iter().sum::<f64>() * inv_m;

        let (g_hat, terms) = if config.error_free_link {
            (mean.clone(), None)
        } else {
            let link_out = link.run(t, &grads)?;
            eta_sum.0 += link_out.adc_eta.iter().sum::<f64>();
            eta_sum.1 += link_out.adc_eta.len();
            let terms = link_out.terms.map(|p| TermPowers {
                iteration,
                signal: p[0],
                interference: p[1],
                distortion: p[2],
                second_distortion: p[3],
                noise: p[4],
            });
            (link_out.g_hat, terms)
        };
        let diff: Vec<f64> = g_hat.iter().zip(&mean).map(|(a, b)| a - b).collect();
        let err = norm(&diff);
        let mean_norm = norm(&mean);
        let rel = if mean_norm > 0.0 { err / mean_norm } else { err };

        learner::global_update(&mut theta, &mut optimizer, &g_hat)
            .map_err(|e| Error::Diverged { iteration, reason: e.to_string() })?;
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration, reason: format!("parameter {i} became {}", theta[i]) });
        }
        let test_accuracy = if iteration % config.eval_every == 0 || iteration == config.iterations {
            Some(learner::evaluate(&model, &theta, &test)?.0)
        } else {
            None
        };
        let record = IterationRecord {
            iteration,
            test_accuracy,
            train_loss,
            grad_est_rel_err: rel,
            grad_est_err_norm: err,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_record(&record, terms.as_ref())?;
        out.records.push(record);
        out.terms.extend(terms);
    }
    out.measured_adc_eta = (eta_sum.1 > 0).then(|| eta_sum.0 / eta_sum.1 as f64);
    out.theta = theta;
    Ok(out)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    run_experiment_with(config, |_, _| Ok(()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Default for Software {
    fn default() -> Self {
        Self { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

/// Metadata written next to every run's CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    pub software: Software,
    pub config: ExperimentConfig,
    pub status: String,
    pub error: Option<String>,
    pub iterations_completed: usize,
    pub final_test_accuracy: Option<f64>,
    pub measured_adc_eta: Option<f64>,
    pub design_dac_eta: f64,
    pub design_adc_eta: f64,
    pub csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub terms: Option<PathBuf>,
}

impl RunFiles {
    pub fn for_config(config: &ExperimentConfig, out_dir: &Path) -> Self {
        let stem = config.run_name();
        Self {
            csv: out_dir.join(format!("{stem}.csv")),
            sidecar: out_dir.join(format!("{stem}.json")),
            terms: config.record_terms.then(|| out_dir.join(format!("{stem}_terms.csv"))),
        }
    }
}

/// Runs an experiment and writes `<name>.csv`, `<name>.json` and, when terms
/// are recorded, `<name>_terms.csv` into `out_dir`.
///
/// Every CSV row goes out in a single write after its iteration finished, so
/// an aborted run leaves only complete rows behind. The sidecar records the
/// abort reason.
pub fn write_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<(RunFiles, Result<RunOutput>)> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let files = RunFiles::for_config(config, out_dir);
    let mut csv = File::create(&files.csv)?;
    csv.write_all(format!("{CSV_HEADER}\n").as_bytes())?;
    let mut terms_file = match &files.terms {
        Some(p) => {
            let mut f = File::create(p)?;
            f.write_all(format!("{TERMS_HEADER}\n").as_bytes())?;
            Some(f)
        }
        None => None,
    };
    let mut completed = 0;
    let result = run_experiment_with(config, |record, terms| {
        csv.write_all(record.csv_row(config).as_bytes())?;
        if let (Some(f), Some(t)) = (terms_file.as_mut(), terms) {
            f.write_all(t.csv_row().as_bytes())?;
        }
        completed = record.iteration;
        Ok(())
    });
    let sidecar = RunSidecar {
        software: Software::default(),
        config: config.clone(),
        status: if result.is_ok() { "completed" } else { "aborted" }.into(),
        error: result.as_ref().err().map(ToString::to_string),
        iterations_completed: completed,
        final_test_accuracy: result.as_ref().ok().and_then(RunOutput::final_accuracy),
        measured_adc_eta: result.as_ref().ok().and_then(|o| o.measured_adc_eta),
        design_dac_eta: Converter::from_bits(config.scenario.dac_bits())?.eta(),
        design_adc_eta: Converter::from_bits(config.scenario.adc_bits())?.eta(),
        csv: files.csv.clone(),
    };
    fs::write(&files.sidecar, serde_json::to_string_pretty(&sidecar)?)?;
    Ok((files, result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Antennas,
    DacBits,
    AdcBits,
    NoiseVariance,
    Scenario,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "antennas" => Ok(SweepAxis::Antennas),
            "dac_bits" => Ok(SweepAxis::DacBits),
            "adc_bits" => Ok(SweepAxis::AdcBits),
            "noise_variance" | "noise_var" => Ok(SweepAxis::NoiseVariance),
            "scenario" => Ok(SweepAxis::Scenario),
            other => Err(Error::invalid(format!(
                "unknown sweep axis {other:?}; expected K, dac_bits, adc_bits, noise_variance or scenario"
            ))),
        }
    }
}

fn parse_bits(value: &str) -> Result<Option<u32>> {
    match value.trim() {
        "inf" | "none" | "∞" => Ok(None),
        v => v.parse().map(Some).map_err(|_| Error::invalid(format!("bad bit count {v:?}"))),
    }
}

/// `base` with one axis set to `value`. Setting converter bits on a scenario
/// that lacks that converter adds it; `inf` removes it.
pub fn apply_axis(base: &ExperimentConfig, axis: SweepAxis, value: &str) -> Result<ExperimentConfig> {
    let mut config = base.clone();
    let s = &base.scenario;
    match axis {
        SweepAxis::Antennas => {
            config.antennas = value.trim().parse().map_err(|_| Error::invalid(format!("bad K {value:?}")))?;
        }
        SweepAxis::DacBits => config.scenario = ScenarioKind::from_bits(parse_bits(value)?, s.adc_bits()),
        SweepAxis::AdcBits => config.scenario = ScenarioKind::from_bits(s.dac_bits(), parse_bits(value)?),
        SweepAxis::NoiseVariance => {
            config.channel.noise_variance =
                value.trim().parse().map_err(|_| Error::invalid(format!("bad noise variance {value:?}")))?;
        }
        SweepAxis::Scenario => config.scenario = value.parse()?,
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub config: ExperimentConfig,
    pub output: RunOutput,
}

/// Runs every point of a sweep with the base seed. Points run in parallel
/// unless the base config is deterministic.
pub fn run_sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepPoint>> {
    let configs = values.iter().map(|v| apply_axis(base, axis, v)).collect::<Result<Vec<_>>>()?;
    let outputs = par::map_slice(base.exec(), &configs, run_experiment);
    values
        .iter()
        .zip(configs)
        .zip(outputs)
        .map(|((value, config), output)| Ok(SweepPoint { value: value.clone(), config, output: output? }))
        .collect()
}

/// Runs a sweep and writes one combined CSV (same header as single runs)
/// plus a sidecar per point. Returns the combined table's path.
pub fn write_sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String], out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let name = serde_json::to_value(axis)?.as_str().unwrap_or("axis").to_string();
    let table = out_dir.join(format!("sweep_{name}.csv"));
    let points = run_sweep(base, axis, values)?;
    let mut body = format!("{CSV_HEADER}\n");
    for p in &points {
        for r in &p.output.records {
            body.push_str(&r.csv_row(&p.config));
        }
        let files = RunFiles::for_config(&p.config, out_dir);
        let sidecar = RunSidecar {
            software: Software::default(),
            config: p.config.clone(),
            status: "completed".into(),
            error: None,
            iterations_completed: p.output.records.len(),
            final_test_accuracy: p.output.final_accuracy(),
            measured_adc_eta: p.output.measured_adc_eta,
            design_dac_eta: Converter::from_bits(p.config.scenario.dac_bits())?.eta(),
            design_adc_eta: Converter::from_bits(p.config.scenario.adc_bits())?.eta(),
            csv: table.clone(),
        };
        fs::write(&files.sidecar, serde_json::to_string_pretty(&sidecar)?)?;
    }
    fs::write(&table, body)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            workers: 3,
            antennas: 4,
            subcarriers: 64,
            cyclic_prefix: 16,
            channel: ChannelProfile { delays: vec![0, 4, 8], ..ChannelProfile::uniform_three_tap() },
            iterations: 4,
            eval_every: 2,
            dataset: DatasetSource::Synthetic(SyntheticSpec {
                train_size: 300,
                test_size: 100,
                features: 20,
                classes: 4,
                ..SyntheticSpec::default()
            }),
            shard_size: 50,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.workers, c.subcarriers, c.cyclic_prefix, c.shard_size), (20, 1024, 1024, 1000));
        assert_eq!(c.channel.delays, vec![0, 500, 1000]);
        assert_eq!(c.channel.noise_variance, 8e-4);
        c.validate().unwrap();
    }

    #[test]
    fn config_json_fills_defaults_and_rejects_unknown_fields() {
        let c =
            ExperimentConfig::from_json(r#"{"antennas": 5, "scenario": {"kind": "dac_only", "dac_bits": 1}}"#).unwrap();
        assert_eq!(c.antennas, 5);
        assert_eq!(c.workers, 20);
        assert_eq!(c.scenario, ScenarioKind::DacOnly { dac_bits: 1 });
        assert!(matches!(ExperimentConfig::from_json(r#"{"antenas": 5}"#), Err(Error::InvalidConfig(_))));
        let echoed = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&echoed).unwrap(), c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ExperimentConfig { antennas: 0, ..tiny() },
            ExperimentConfig { iterations: 0, ..tiny() },
            ExperimentConfig { cyclic_prefix: 4, ..tiny() },
            ExperimentConfig { batch_size: Some(51), ..tiny() },
            ExperimentConfig { scenario: ScenarioKind::DacOnly { dac_bits: 0 }, ..tiny() },
            ExperimentConfig { channel: ChannelProfile { noise_variance: -1.0, ..tiny().channel }, ..tiny() },
        ];
        for c in bad {
            assert!(run_experiment(&c).is_err(), "{c:?}");
        }
    }

    #[test]
    fn tiny_run_produces_records_on_schedule() {
        let out = run_experiment(&tiny()).unwrap();
        assert_eq!(out.records.len(), 4);
        let evaluated: Vec<usize> =
            out.records.iter().filter(|r| r.test_accuracy.is_some()).map(|r| r.iteration).collect();
        assert_eq!(evaluated, vec![2, 4]);
        assert!(out.records.iter().all(|r| r.grad_est_rel_err.is_finite() && r.grad_est_rel_err > 0.0));
        assert!(out.measured_adc_eta.is_none());
    }

    #[test]
    fn sequential_and_parallel_runs_agree_bitwise() {
        let c = ExperimentConfig {
            scenario: ScenarioKind::Joint { dac_bits: 1, adc_bits: 2 },
            record_terms: true,
            ..tiny()
        };
        let par = run_experiment(&c).unwrap();
        let seq = run_experiment(&ExperimentConfig { deterministic: true, ..c }).unwrap();
        assert_eq!(par.theta, seq.theta);
        assert_eq!(par.terms, seq.terms);
        assert_eq!(par.terms.len(), 4);
        assert!(par.measured_adc_eta.unwrap() > 0.05);
    }

    #[test]
    fn sweep_axis_parsing_and_application() {
        assert!("bits".parse::<SweepAxis>().is_err());
        let base = tiny();
        let c = apply_axis(&base, "dac_bits".parse().unwrap(), "2").unwrap();
        assert_eq!(c.scenario, ScenarioKind::DacOnly { dac_bits: 2 });
        let c = apply_axis(&c, SweepAxis::AdcBits, "1").unwrap();
        assert_eq!(c.scenario, ScenarioKind::Joint { dac_bits: 2, adc_bits: 1 });
        let c = apply_axis(&c, SweepAxis::DacBits, "inf").unwrap();
        assert_eq!(c.scenario, ScenarioKind::AdcOnly { adc_bits: 1 });
        assert_eq!(apply_axis(&base, SweepAxis::Antennas, "7").unwrap().antennas, 7);
        assert_eq!(apply_axis(&base, SweepAxis::NoiseVariance, "0.004").unwrap().channel.noise_variance, 4e-3);
        assert!(apply_axis(&base, SweepAxis::Antennas, "0").is_err());
        assert!(run_sweep(&base, SweepAxis::Antennas, &[]).unwrap().is_empty());
    }
}
