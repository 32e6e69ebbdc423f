use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::percentile;

use super::stats::{mean, population_std};
use super::text::{compressibility, rouge_l_tokens, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub std: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

/// Complexity heuristics of one task's dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub name: String,
    pub n_examples: u64,
    pub input_len: LengthStats,
    pub output_len: LengthStats,
    pub example_len: LengthStats,
    pub io_rouge_l: Spread,
    pub compressibility: Spread,
}

/// Heuristic feature names, in the order of [`TaskProfile::features`].
pub const HEURISTICS: [&str; 14] = [
    "n_examples",
    "input_len_p95",
    "input_len_mean",
    "input_len_std",
    "output_len_p95",
    "output_len_mean",
    "output_len_std",
    "example_len_mean",
    "example_len_p95",
    "example_len_std",
    "io_rouge_l_mean",
    "io_rouge_l_std",
    "compressibility_mean",
    "compressibility_std",
];

impl TaskProfile {
    pub fn features(&self) -> [f64; 14] {
        [
            self.n_examples as f64,
            self.input_len.p95,
            self.input_len.mean,
            self.input_len.std,
            self.output_len.p95,
            self.output_len.mean,
            self.output_len.std,
            self.example_len.mean,
            self.example_len.p95,
            self.example_len.std,
            self.io_rouge_l.mean,
            self.io_rouge_l.std,
            self.compressibility.mean,
            self.compressibility.std,
        ]
    }

    fn from_row(row: ProfileRow) -> Self {
        TaskProfile {
            name: row.name,
            n_examples: row.n_examples,
            input_len: LengthStats {
                mean: row.input_len_mean,
                std: row.input_len_std,
                p95: row.input_len_p95,
            },
            output_len: LengthStats {
                mean: row.output_len_mean,
                std: row.output_len_std,
                p95: row.output_len_p95,
            },
            example_len: LengthStats {
                mean: row.example_len_mean,
                std: row.example_len_std,
                p95: row.example_len_p95,
            },
            io_rouge_l: Spread {
                mean: row.io_rouge_l_mean,
                std: row.io_rouge_l_std,
            },
            compressibility: Spread {
                mean: row.compressibility_mean,
                std: row.compressibility_std,
            },
        }
    }

    fn to_row(&self) -> ProfileRow {
        ProfileRow {
            name: self.name.clone(),
            n_examples: self.n_examples,
            input_len_mean: self.input_len.mean,
            input_len_std: self.input_len.std,
            input_len_p95: self.input_len.p95,
            output_len_mean: self.output_len.mean,
            output_len_std: self.output_len.std,
            output_len_p95: self.output_len.p95,
            example_len_mean: self.example_len.mean,
            example_len_std: self.example_len.std,
            example_len_p95: self.example_len.p95,
            io_rouge_l_mean: self.io_rouge_l.mean,
            io_rouge_l_std: self.io_rouge_l.std,
            compressibility_mean: self.compressibility.mean,
            compressibility_std: self.compressibility.std,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.n_examples < 1 {
            return Err("n_examples must be at least 1".into());
        }
        for (label, s) in [
            ("input_len", &self.input_len),
            ("output_len", &self.output_len),
            ("example_len", &self.example_len),
        ] {
            if s.std < 0.0 {
                return Err(format!("{label}_std is negative"));
            }
            if s.p95 < s.mean - 3.0 * s.std {
                return Err(format!("{label}_p95 below mean - 3 std"));
            }
        }
        if self.io_rouge_l.std < 0.0 || self.compressibility.std < 0.0 {
            return Err("negative std".into());
        }
        Ok(())
    }
}

/// CSV row layout for profiles: the nested fields flattened with `_`.
#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    name: String,
    n_examples: u64,
    input_len_mean: f64,
    input_len_std: f64,
    input_len_p95: f64,
    output_len_mean: f64,
    output_len_std: f64,
    output_len_p95: f64,
    example_len_mean: f64,
    example_len_std: f64,
    example_len_p95: f64,
    io_rouge_l_mean: f64,
    io_rouge_l_std: f64,
    compressibility_mean: f64,
    compressibility_std: f64,
}

fn length_stats(xs: &[f64]) -> LengthStats {
    LengthStats {
        mean: mean(xs),
        std: population_std(xs),
        p95: percentile(xs, 0.95).expect("non-empty"),
    }
}

/// Profiles a dataset of `(input, output)` examples.
///
/// Per example: token counts of input, output and both; ROUGE-L of the
/// output against the input; compressibility of `input + "\n" + output`.
pub fn compute_profile(examples: &[(String, String)], name: &str) -> Result<TaskProfile> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let n = examples.len();
    let mut input_len = Vec::with_capacity(n);
    let mut output_len = Vec::with_capacity(n);
    let mut example_len = Vec::with_capacity(n);
    let mut io_rouge = Vec::with_capacity(n);
    let mut compress = Vec::with_capacity(n);
    for (input, output) in examples {
        let tin = tokenize(input);
        let tout = tokenize(output);
        input_len.push(tin.len() as f64);
        output_len.push(tout.len() as f64);
        example_len.push((tin.len() + tout.len()) as f64);
        io_rouge.push(rouge_l_tokens(&tout, &tin));
        compress.push(compressibility(&format!("{input}\n{output}"))?);
    }
    Ok(TaskProfile {
        name: name.to_owned(),
        n_examples: n as u64,
        input_len: length_stats(&input_len),
        output_len: length_stats(&output_len),
        example_len: length_stats(&example_len),
        io_rouge_l: Spread {
            mean: mean(&io_rouge),
            std: population_std(&io_rouge),
        },
        compressibility: Spread {
            mean: mean(&compress),
            std: population_std(&compress),
        },
    })
}

#[derive(Deserialize)]
struct JsonlExample {
    input: String,
    output: String,
}

/// Reads JSON-lines with `input` and `output` string fields. Blank lines
/// are skipped; errors carry 1-based line numbers.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: JsonlExample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((ex.input, ex.output));
    }
    Ok(out)
}

/// Measured quality of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub name: String,
    pub gpt4_score: f64,
    pub max_gpt4_lift: f64,
    pub avg_base_lift: f64,
    pub best_base_score: f64,
    pub avg_base_score: f64,
    pub best_ft_score: f64,
    pub avg_ft_score: f64,
}

/// Tolerance for the lift = score difference check; fixtures carry three decimals.
const LIFT_TOLERANCE: f64 = 0.0015;

impl QualityRecord {
    pub fn get(&self, metric: QualityMetric) -> f64 {
        match metric {
            QualityMetric::Gpt4Score => self.gpt4_score,
            QualityMetric::MaxGpt4Lift => self.max_gpt4_lift,
            QualityMetric::AvgBaseScore => self.avg_base_score,
            QualityMetric::BestBaseScore => self.best_base_score,
            QualityMetric::AvgBaseLift => self.avg_base_lift,
            QualityMetric::AvgFtScore => self.avg_ft_score,
            QualityMetric::BestFtScore => self.best_ft_score,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let scores = [
            self.gpt4_score,
            self.best_base_score,
            self.avg_base_score,
            self.best_ft_score,
            self.avg_ft_score,
        ];
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err("scores must lie in [0, 1]".into());
        }
        if [self.max_gpt4_lift, self.avg_base_lift]
            .iter()
            .any(|l| !(-1.0..=1.0).contains(l))
        {
            return Err("lifts must lie in [-1, 1]".into());
        }
        if (self.best_ft_score - self.gpt4_score - self.max_gpt4_lift).abs() > LIFT_TOLERANCE {
            return Err("max_gpt4_lift != best_ft_score - gpt4_score".into());
        }
        if (self.avg_ft_score - self.avg_base_score - self.avg_base_lift).abs() > LIFT_TOLERANCE {
            return Err("avg_base_lift != avg_ft_score - avg_base_score".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QualityMetric {
    Gpt4Score,
    MaxGpt4Lift,
    AvgBaseScore,
    BestBaseScore,
    AvgBaseLift,
    AvgFtScore,
    BestFtScore,
}

impl QualityMetric {
    pub const ALL: [QualityMetric; 7] = [
        QualityMetric::Gpt4Score,
        QualityMetric::MaxGpt4Lift,
        QualityMetric::AvgBaseScore,
        QualityMetric::BestBaseScore,
        QualityMetric::AvgBaseLift,
        QualityMetric::AvgFtScore,
        QualityMetric::BestFtScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QualityMetric::Gpt4Score => "gpt4_score",
            QualityMetric::MaxGpt4Lift => "max_gpt4_lift",
            QualityMetric::AvgBaseScore => "avg_base_score",
            QualityMetric::BestBaseScore => "best_base_score",
            QualityMetric::AvgBaseLift => "avg_base_lift",
            QualityMetric::AvgFtScore => "avg_ft_score",
            QualityMetric::BestFtScore => "best_ft_score",
        }
    }

    pub fn from_name(name: &str) -> Option<QualityMetric> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

fn read_csv<T: serde::de::DeserializeOwned, R: Read>(
    reader: R,
    check: impl Fn(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<T>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        check(&row).map_err(|message| Error::Parse { line, message })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_profiles_csv<R: Read>(reader: R) -> Result<Vec<TaskProfile>> {
    let rows: Vec<ProfileRow> = read_csv(reader, |_| Ok(()))?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let p = TaskProfile::from_row(row);
        p.check().map_err(|message| Error::Parse {
            line: i + 2,
            message,
        })?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_profiles_csv<W: Write>(profiles: &[TaskProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in profiles {
        w.serialize(p.to_row())
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_quality_csv<R: Read>(reader: R) -> Result<Vec<QualityRecord>> {
    read_csv(reader, QualityRecord::check)
}
