//! Decibel conversions. Configuration is expressed in dB / dBm / per-km²;
//! everything inside the engines is linear SI.

/// `x` dB to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// `x` dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Points per km² to points per m².
pub fn per_km2_to_per_m2(density: f64) -> f64 {
    density * 1e-6
}

pub fn per_m2_to_per_km2(density: f64) -> f64 {
    density * 1e6
}
