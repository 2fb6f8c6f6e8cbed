//! Human Mortality Database ingestion.
//!
//! Parses the `Mx_1x1` period death-rate files distributed by the HMD: a
//! free-text preamble, a header line `Year Age Female Male Total`, then one
//! whitespace-delimited row per year/age cell. Ages run `0, 1, …, 109,
//! 110+`; rates that could not be computed are printed as `.`.
//!
//! Mortality curves feed a log transform, so nonpositive and missing rates
//! must be repaired first: within each year they are filled by linear
//! interpolation along age between the nearest usable neighbours, or by the
//! nearest usable value at the boundary. The repaired log-rates, with ages
//! mapped affinely onto `[0, 1]` (age 110 ↦ 1), are projected onto the
//! requested basis by least squares.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use fraccurve_core::series::project_curves;
use fraccurve_core::{Basis, Error, FunctionalSeries, Result};

/// Oldest tabulated age; the open interval `110+` is folded into it.
pub const MAX_AGE: u32 = 110;

/// Gender column of an HMD rate file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Gender {
    Female,
    Male,
    Total,
}

impl Gender {
    /// Column index among the three rate columns.
    fn column(self) -> usize {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
            Gender::Total => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Total => "total",
        }
    }
}

/// A parsed HMD rate file: one row per year, one column per age, three
/// gender layers. Missing cells are `NaN`.
#[derive(Clone, Debug)]
pub struct HMDTable {
    years: Vec<i32>,
    ages: Vec<u32>,
    rates: [DMatrix<f64>; 3],
}

impl HMDTable {
    /// Tabulated years, ascending.
    pub fn years(&self) -> &[i32] {
        &self.years
    }

    /// Tabulated ages, contiguous from the youngest.
    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    /// Raw rates of one gender (`NaN` marks a missing cell).
    pub fn rates(&self, gender: Gender) -> &DMatrix<f64> {
        &self.rates[gender.column()]
    }

    /// Parse an `Mx_1x1` file.
    ///
    /// Lines before the `Year Age Female Male Total` header are ignored;
    /// every later nonempty line must be a well-formed data row (errors
    /// name the offending line). Each year must cover the same contiguous
    /// age range.
    pub fn parse(path: &Path) -> Result<HMDTable> {
        let text = fs::read_to_string(path)?;
        let mut header_seen = false;
        let mut rows: Vec<(i32, u32, [f64; 3])> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if !header_seen {
                if fields == ["Year", "Age", "Female", "Male", "Total"] {
                    header_seen = true;
                }
                continue;
            }
            if fields.len() != 5 {
                return Err(Error::Format(format!(
                    "line {line_no}: expected 5 fields (Year Age Female Male Total), got {}",
                    fields.len()
                )));
            }
            let year: i32 = fields[0].parse().map_err(|_| {
                Error::Format(format!("line {line_no}: `{}` is not a year", fields[0]))
            })?;
            let age = parse_age(fields[1], line_no)?;
            let rates = [
                parse_rate(fields[2], line_no)?,
                parse_rate(fields[3], line_no)?,
                parse_rate(fields[4], line_no)?,
            ];
            rows.push((year, age, rates));
        }
        if !header_seen {
            return Err(Error::Format(
                "no `Year Age Female Male Total` header found; is this an Mx_1x1 file?".into(),
            ));
        }
        if rows.is_empty() {
            return Err(Error::Format("no data rows after the header".into()));
        }
        assemble(rows)
    }

    /// Repaired log-rate curves of one gender, as the age grid on `[0, 1]`
    /// and a year × age value matrix.
    ///
    /// Nonpositive and missing rates are filled along age within each year
    /// (linear interpolation inside, nearest neighbour at the ends); a year
    /// without a single usable rate is rejected by name.
    pub fn log_curves(&self, gender: Gender) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let raw = self.rates(gender);
        let mut filled = raw.clone();
        for (y, &year) in self.years.iter().enumerate() {
            let mut profile: Vec<f64> = raw.row(y).iter().copied().collect();
            fill_profile(&mut profile).map_err(|_| {
                Error::Format(format!(
                    "year {year}: every {} rate is missing or nonpositive",
                    gender.name()
                ))
            })?;
            for (a, v) in profile.into_iter().enumerate() {
                filled[(y, a)] = v.ln();
            }
        }
        let grid: Vec<f64> =
            self.ages.iter().map(|&a| f64::from(a) / f64::from(MAX_AGE)).collect();
        Ok((grid, filled))
    }
}

fn parse_age(field: &str, line_no: usize) -> Result<u32> {
    if field == "110+" {
        return Ok(MAX_AGE);
    }
    field
        .parse()
        .map_err(|_| Error::Format(format!("line {line_no}: `{field}` is not an age")))
}

/// One rate cell: `.` means missing (mapped to `NaN`); anything else must
/// be a nonnegative number.
fn parse_rate(field: &str, line_no: usize) -> Result<f64> {
    if field == "." {
        return Ok(f64::NAN);
    }
    let value: f64 = field
        .parse()
        .map_err(|_| Error::Format(format!("line {line_no}: `{field}` is not a rate")))?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Format(format!(
            "line {line_no}: rate {field} is not a finite nonnegative number"
        )));
    }
    Ok(value)
}

/// Group parsed rows into the year × age layout, checking that every year
/// covers the same contiguous ages exactly once.
fn assemble(rows: Vec<(i32, u32, [f64; 3])>) -> Result<HMDTable> {
    let mut years: Vec<i32> = Vec::new();
    for &(year, _, _) in &rows {
        if years.last() != Some(&year) {
            if years.contains(&year) {
                return Err(Error::Format(format!("year {year} appears in two separate blocks")));
            }
            years.push(year);
        }
    }
    let ages: Vec<u32> = rows.iter().take_while(|r| r.0 == years[0]).map(|r| r.1).collect();
    if ages.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Format(format!(
            "ages of year {} are not contiguous",
            years[0]
        )));
    }
    let expected = ages.len();
    let mut rates =
        [(); 3].map(|_| DMatrix::from_element(years.len(), expected, f64::NAN));
    let mut cursor = 0;
    for (y, &year) in years.iter().enumerate() {
        for (a, &age) in ages.iter().enumerate() {
            match rows.get(cursor) {
                Some(&(ry, ra, cells)) if ry == year && ra == age => {
                    for (g, matrix) in rates.iter_mut().enumerate() {
                        matrix[(y, a)] = cells[g];
                    }
                    cursor += 1;
                }
                _ => {
                    return Err(Error::Format(format!(
                        "year {year} is missing age {age} (each year must cover ages {}-{})",
                        ages[0],
                        ages[expected - 1]
                    )))
                }
            }
        }
    }
    if cursor != rows.len() {
        let (year, age, _) = rows[cursor];
        return Err(Error::Format(format!("unexpected extra row: year {year}, age {age}")));
    }
    Ok(HMDTable { years, ages, rates })
}

/// Fill unusable entries (`NaN` or nonpositive) of one age profile in
/// place. Fails when nothing is usable.
fn fill_profile(vals: &mut [f64]) -> Result<()> {
    let usable: Vec<usize> =
        (0..vals.len()).filter(|&i| vals[i].is_finite() && vals[i] > 0.0).collect();
    if usable.is_empty() {
        return Err(Error::EmptyInput("no usable rate in the profile"));
    }
    for i in 0..vals.len() {
        if vals[i].is_finite() && vals[i] > 0.0 {
            continue;
        }
        let next = usable.iter().copied().find(|&u| u > i);
        let prev = usable.iter().copied().rev().find(|&u| u < i);
        vals[i] = match (prev, next) {
            (Some(l), Some(r)) => {
                let w = (i - l) as f64 / (r - l) as f64;
                vals[l] + w * (vals[r] - vals[l])
            }
            (Some(l), None) => vals[l],
            (None, Some(r)) => vals[r],
            (None, None) => unreachable!("usable is nonempty"),
        };
    }
    Ok(())
}

/// Parse an HMD file and project one gender's log-mortality curves onto
/// `basis`.
///
/// The label records the gender and year range, e.g. `hmd-male-1751-2021`.
pub fn import_hmd(path: &Path, gender: Gender, basis: Basis) -> Result<FunctionalSeries> {
    let table = HMDTable::parse(path)?;
    let (grid, log_rates) = table.log_curves(gender)?;
    let label = format!(
        "hmd-{}-{}-{}",
        gender.name(),
        table.years().first().expect("nonempty"),
        table.years().last().expect("nonempty")
    );
    project_curves(&log_rates, &grid, basis, label)
}
