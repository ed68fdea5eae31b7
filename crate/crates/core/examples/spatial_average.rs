//! Regional daily means from gridded fields, then standardization and a
//! chronological split.
//!
//! Writes three small `date,lat,lon,value` grids to a temp dir, averages the
//! 60-90N band, and prints the resulting frame.
//!
//! cargo run --example spatial_average

use std::fmt::Write as _;

use chrono::NaiveDate;
use kgcm::ingest::{chronological_split, spatial_average, standardize, AreaWeighting, GriddedField, SplitFractions};

fn main() -> kgcm::Result<()> {
    let dir = std::env::temp_dir().join("kgcm-spatial-average");
    std::fs::create_dir_all(&dir).map_err(|e| kgcm::KgcmError::io(&dir, e))?;
    let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    let lats = [50.0, 60.0, 70.0, 80.0, 90.0];
    let lons = [0.0, 90.0, 180.0, 270.0];

    let mut fields = Vec::new();
    for (name, base) in [("sit", 1.8), ("ssh", 0.2), ("vtot", 0.05)] {
        let mut csv = String::from("date,lat,lon,value\n");
        for day in 0..30 {
            let date = start + chrono::Duration::days(day);
            for (i, lat) in lats.iter().enumerate() {
                for (j, lon) in lons.iter().enumerate() {
                    // one missing cell per day, skipped by the mean
                    let value = if (i + j + day as usize) % 7 == 0 {
                        String::new()
                    } else {
                        format!("{:.4}", base * (1.0 + 0.01 * day as f64) + 0.05 * (i as f64 - j as f64))
                    };
                    writeln!(csv, "{date},{lat},{lon},{value}").unwrap();
                }
            }
        }
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, csv).map_err(|e| kgcm::KgcmError::io(&path, e))?;
        fields.push((name.to_string(), GriddedField::load(&path)?));
    }

    for weighting in [AreaWeighting::Unweighted, AreaWeighting::CosLatitude] {
        let frame = spatial_average(&fields, 60.0, 90.0, weighting)?;
        println!("{weighting:?}: {} days, first row {:?}", frame.len(), frame.features().row(0).to_vec());
    }

    let frame = spatial_average(&fields, 60.0, 90.0, AreaWeighting::Unweighted)?;
    let splits = chronological_split(&frame, SplitFractions::default(), 1)?;
    println!("split rows: train {} / val {} / test {}", splits.train.len(), splits.val.len(), splits.test.len());
    let (train_std, stats) = standardize(&splits.train, None)?;
    let (test_std, _) = standardize(&splits.test, Some(&stats))?;
    println!("train-fitted stats: {stats:?}");
    println!("standardized train row 0: {:?}", train_std.features().row(0).to_vec());
    println!("standardized test row 0:  {:?}", test_std.features().row(0).to_vec());
    Ok(())
}
