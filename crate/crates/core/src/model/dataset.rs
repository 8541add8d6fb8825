use std::io::{Read, Write};

use super::{ModelError, Result, DEMOGRAPHIC_WIDTH};
use crate::scalar::Scalar;

/// Model inputs: one timed state sample and one demographic vector per row,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDataset<T> {
    tss_width: usize,
    case_ids: Vec<String>,
    tss: Vec<T>,
    demographics: Vec<T>,
    labels: Vec<u8>,
}

impl<T: Scalar> PredictionDataset<T> {
    pub fn new(tss_width: usize) -> Self {
        Self::with_capacity(tss_width, 0)
    }

    pub fn with_capacity(tss_width: usize, rows: usize) -> Self {
        Self {
            tss_width,
            case_ids: Vec::with_capacity(rows),
            tss: Vec::with_capacity(rows * tss_width),
            demographics: Vec::with_capacity(rows * DEMOGRAPHIC_WIDTH),
            labels: Vec::with_capacity(rows),
        }
    }

    pub fn push(&mut self, case_id: String, tss: &[T], demo: &[T], label: u8) -> Result<()> {
        if tss.len() != self.tss_width {
            return Err(ModelError::Width {
                what: "timed state sample",
                expected: self.tss_width,
                found: tss.len(),
            });
        }
        if demo.len() != DEMOGRAPHIC_WIDTH {
            return Err(ModelError::Width {
                what: "demographic",
                expected: DEMOGRAPHIC_WIDTH,
                found: demo.len(),
            });
        }
        if label > 1 {
            return Err(ModelError::Label(label));
        }
        self.case_ids.push(case_id);
        self.tss.extend_from_slice(tss);
        self.demographics.extend_from_slice(demo);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn tss_width(&self) -> usize {
        self.tss_width
    }

    /// Columns of the concatenated `tss ⊕ demographics` row.
    pub fn width(&self) -> usize {
        self.tss_width + DEMOGRAPHIC_WIDTH
    }

    pub fn tss_row(&self, i: usize) -> &[T] {
        &self.tss[i * self.tss_width..(i + 1) * self.tss_width]
    }

    pub fn demo_row(&self, i: usize) -> &[T] {
        &self.demographics[i * DEMOGRAPHIC_WIDTH..(i + 1) * DEMOGRAPHIC_WIDTH]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        let mut r = self.tss_row(i).to_vec();
        r.extend_from_slice(self.demo_row(i));
        r
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn case_ids(&self) -> &[String] {
        &self.case_ids
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.tss_width, rows.len());
        for &i in rows {
            out.case_ids.push(self.case_ids[i].clone());
            out.tss.extend_from_slice(self.tss_row(i));
            out.demographics.extend_from_slice(self.demo_row(i));
            out.labels.push(self.labels[i]);
        }
        out
    }

    /// Mean of every column of the concatenated row.
    pub fn column_means(&self) -> Vec<T> {
        let mut sums = vec![0.0f64; self.width()];
        for i in 0..self.len() {
            for (s, x) in sums
                .iter_mut()
                .zip(self.tss_row(i).iter().chain(self.demo_row(i)))
            {
                *s += x.as_f64();
            }
        }
        let n = self.len().max(1) as f64;
        sums.into_iter().map(|s| T::lit(s / n)).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

pub fn dataset_header(places: usize) -> Vec<String> {
    let mut h = vec!["case_id".to_string()];
    for prefix in ["f", "c", "m"] {
        h.extend((0..places).map(|i| format!("{prefix}_{i}")));
    }
    h.push("age".into());
    h.extend((0..DEMOGRAPHIC_WIDTH - 1).map(|i| format!("ins_{i}")));
    h.push("label".into());
    h
}

/// Writes `case_id, f_*, c_*, m_*, age, ins_0..ins_4, label`. The `age`
/// column holds the encoded value (years / 100). Floats use the shortest
/// representation that parses back to the same value.
pub fn write_dataset_csv<T: Scalar, W: Write>(ds: &PredictionDataset<T>, out: W) -> Result<()> {
    if !ds.tss_width.is_multiple_of(3) {
        return Err(ModelError::Width {
            what: "timed state sample (multiple of 3)",
            expected: ds.tss_width - ds.tss_width % 3,
            found: ds.tss_width,
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header(ds.tss_width / 3))?;
    for i in 0..ds.len() {
        let mut rec = Vec::with_capacity(ds.width() + 2);
        rec.push(ds.case_ids[i].clone());
        rec.extend(ds.tss_row(i).iter().map(|x| x.to_string()));
        rec.extend(ds.demo_row(i).iter().map(|x| x.to_string()));
        rec.push(ds.labels[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<T: Scalar, R: Read>(input: R) -> Result<PredictionDataset<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let parse_err = |line: usize, reason: String| ModelError::Parse {
        file: "dataset",
        line,
        reason,
    };
    let fixed = 2 + DEMOGRAPHIC_WIDTH;
    if header.len() < fixed || !(header.len() - fixed).is_multiple_of(3) {
        return Err(parse_err(
            1,
            format!("unexpected column count {}", header.len()),
        ));
    }
    let places = (header.len() - fixed) / 3;
    if header != dataset_header(places) {
        return Err(parse_err(
            1,
            "header does not match the dataset layout".into(),
        ));
    }
    let mut ds = PredictionDataset::new(3 * places);
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields", header.len())));
        }
        let values = record
            .iter()
            .skip(1)
            .take(header.len() - 2)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| parse_err(line, format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<T>>>()?;
        let label: u8 = record[header.len() - 1]
            .parse()
            .map_err(|_| parse_err(line, "label is not 0 or 1".into()))?;
        let (tss, demo) = values.split_at(3 * places);
        ds.push(record[0].to_string(), tss, demo, label)?;
    }
    Ok(ds)
}
