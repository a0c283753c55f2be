//! Unit conversions at the I/O boundary. Everything inside the crate works in
//! hartree atomic units.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// CODATA 2018 hartree energy in eV.
pub const HARTREE_IN_EV: f64 = 27.211_386_245_988;
/// CODATA 2018 Boltzmann constant in hartree per kelvin.
pub const BOLTZMANN_HARTREE_PER_KELVIN: f64 = 3.166_811_563_455_546e-6;
/// CODATA 2018 atomic unit of current in ampere.
pub const ATOMIC_CURRENT_IN_AMPERE: f64 = 6.623_618_237_510e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    ElectronVolt,
    Hartree,
    Kelvin,
    AtomicCurrent,
    Ampere,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::ElectronVolt => "eV",
            Unit::Hartree => "hartree",
            Unit::Kelvin => "K",
            Unit::AtomicCurrent => "au_current",
            Unit::Ampere => "A",
        };
        f.write_str(s)
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ev" => Ok(Unit::ElectronVolt),
            "hartree" | "ha" | "au_energy" => Ok(Unit::Hartree),
            "k" | "kelvin" => Ok(Unit::Kelvin),
            "au_current" | "au-current" => Ok(Unit::AtomicCurrent),
            "a" | "ampere" => Ok(Unit::Ampere),
            _ => Err(Error::UnsupportedUnits { from: s.to_string(), to: String::new() }),
        }
    }
}

pub fn convert_units(value: f64, from: Unit, to: Unit) -> Result<f64> {
    use Unit::*;
    let factor = match (from, to) {
        (a, b) if a == b => 1.0,
        (ElectronVolt, Hartree) => 1.0 / HARTREE_IN_EV,
        (Hartree, ElectronVolt) => HARTREE_IN_EV,
        (Kelvin, Hartree) => BOLTZMANN_HARTREE_PER_KELVIN,
        (Hartree, Kelvin) => 1.0 / BOLTZMANN_HARTREE_PER_KELVIN,
        (AtomicCurrent, Ampere) => ATOMIC_CURRENT_IN_AMPERE,
        (Ampere, AtomicCurrent) => 1.0 / ATOMIC_CURRENT_IN_AMPERE,
        _ => {
            return Err(Error::UnsupportedUnits { from: from.to_string(), to: to.to_string() });
        }
    };
    Ok(value * factor)
}

pub fn ev_to_hartree(ev: f64) -> f64 {
    ev / HARTREE_IN_EV
}

pub fn hartree_to_ev(ha: f64) -> f64 {
    ha * HARTREE_IN_EV
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_ev_is_about_0_036_hartree() {
        let h = convert_units(1.0, Unit::ElectronVolt, Unit::Hartree).unwrap();
        assert!((h - 0.036_749_3).abs() < 1e-7, "{h}");
    }

    #[test]
    fn milli_hartree_is_about_316_kelvin() {
        let k = convert_units(1e-3, Unit::Hartree, Unit::Kelvin).unwrap();
        assert!((k - 315.775).abs() < 0.01, "{k}");
    }

    #[test]
    fn current_anchor_is_about_2_na() {
        let a = convert_units(3e-7, Unit::AtomicCurrent, Unit::Ampere).unwrap();
        assert!((a * 1e9 - 1.987).abs() < 1e-3, "{a}");
    }

    #[test]
    fn inverse_pairs_round_trip() {
        for (a, b) in [
            (Unit::ElectronVolt, Unit::Hartree),
            (Unit::Kelvin, Unit::Hartree),
            (Unit::AtomicCurrent, Unit::Ampere),
        ] {
            let x = 0.731;
            let y = convert_units(convert_units(x, a, b).unwrap(), b, a).unwrap();
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        assert!(matches!(
            convert_units(1.0, Unit::ElectronVolt, Unit::Ampere),
            Err(Error::UnsupportedUnits { .. })
        ));
        assert!(convert_units(1.0, Unit::Kelvin, Unit::AtomicCurrent).is_err());
    }
}
