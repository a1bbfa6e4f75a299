#![allow(dead_code)]
// 3.14 is a printed coefficient, not π.
#![allow(clippy::approx_constant)]

use ormd_core::basis::{AmplitudeBasis, BasisFamily, CosineSeries, WaveformTemplate};
use ormd_core::levels::{BlockadeModel, DriveKind, DriveScheme};
use ormd_core::metrics::GateSetup;
use ormd_core::propagate::PulseSchedule;

pub const TWO_PHOTON: DriveKind = DriveKind::TwoPhoton { coupling_rabi_mhz: 350.0, intermediate_detuning_mhz: 5000.0 };

pub struct Published {
    pub name: &'static str,
    pub kind: DriveKind,
    pub template: WaveformTemplate,
    pub dual: bool,
}

impl Published {
    pub fn setup(&self, duration_us: f64) -> GateSetup {
        let schedule = if self.dual { PulseSchedule::dual(duration_us) } else { PulseSchedule::single(duration_us) };
        let drive = DriveScheme { kind: self.kind, waveform: self.template.waveform().unwrap() };
        GateSetup::new(drive, BlockadeModel::Idealized, schedule)
    }
}

fn template(basis: AmplitudeBasis, amplitude: &[f64], constant: f64, cosine: &[f64]) -> WaveformTemplate {
    WaveformTemplate { basis, amplitude: amplitude.to_vec(), detuning: CosineSeries::new(constant, cosine.to_vec()) }
}

const U: AmplitudeBasis = AmplitudeBasis::Adjusted(BasisFamily::U);
const V: AmplitudeBasis = AmplitudeBasis::Adjusted(BasisFamily::V);
const SINE: AmplitudeBasis = AmplitudeBasis::Sine;

pub fn published(name: &str) -> Published {
    all().into_iter().find(|p| p.name == name).unwrap_or_else(|| panic!("unknown waveform {name}"))
}

pub fn all() -> Vec<Published> {
    let one = DriveKind::OnePhoton;
    vec![
        Published {
            name: "fig1a",
            kind: one,
            template: template(U, &[9.71, 13.55, 0.10, 26.29, 8.89], 5.358, &[5.497]),
            dual: false,
        },
        Published {
            name: "fig1b",
            kind: one,
            template: template(U, &[42.20, -24.93, -25.00, -42.00, 111.85], 3.448, &[]),
            dual: false,
        },
        Published {
            name: "fig2a",
            kind: TWO_PHOTON,
            template: template(U, &[270.84, -25.68, -88.66, -21.08, 1021.0], -0.577, &[0.101]),
            dual: false,
        },
        Published {
            name: "fig2b",
            kind: TWO_PHOTON,
            template: template(U, &[260.85, -11.51, -79.85, 0.0, 992.41], -0.636, &[]),
            dual: false,
        },
        Published {
            name: "fig3a",
            kind: one,
            template: template(V, &[16.41, -0.49, 4.06, 22.38, 29.25, -2.37], 4.772, &[4.660]),
            dual: false,
        },
        Published {
            name: "fig3b",
            kind: TWO_PHOTON,
            template: template(V, &[203.25, -5.91, -0.96, 1199.83, 156.87, 0.0], -0.741, &[-0.079]),
            dual: false,
        },
        Published {
            name: "fig3c",
            kind: TWO_PHOTON,
            template: template(V, &[200.45, -4.29, 3.14, 1196.44, 157.56, 0.0], -0.709, &[]),
            dual: false,
        },
        Published {
            name: "fig4a",
            kind: one,
            template: template(V, &[8.39, -0.12, -10.0, 49.24, 29.25, 0.0], 11.446, &[]),
            dual: true,
        },
        Published {
            name: "fig4b",
            kind: TWO_PHOTON,
            template: template(U, &[118.41, 52.34, -99.12, 195.13, 602.87], -0.867, &[]),
            dual: true,
        },
        Published {
            name: "fig6-single",
            kind: one,
            template: template(SINE, &[16.62], 4.749, &[3.652, -2.677]),
            dual: false,
        },
        Published {
            name: "fig6-dual",
            kind: one,
            template: template(SINE, &[9.41], 6.609, &[6.641, 0.476]),
            dual: true,
        },
    ]
}
