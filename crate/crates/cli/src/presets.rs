//! Built-in experiments.

use crate::config::{
    ActionBlock, AnalysisBlock, ExperimentConfig, FName, Figure, LatticeBlock, OutputBlock, PotentialName,
    SamplerBlock, SeriesSpec,
};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

const SMALL_N: [usize; 5] = [64, 128, 256, 512, 1024];
const MID_N: [usize; 5] = [256, 512, 1024, 2048, 4096];
const LARGE_N: [usize; 5] = [512, 1024, 2048, 4096, 8192];
/// Bounded f needs long lattices before the jumps dominate `⟨L⟩`.
const BOUNDED_N: [usize; 5] = [1024, 2048, 4096, 8192, 16384];

fn base(name: &str, n_sites: &[usize], series: Vec<SeriesSpec>) -> ExperimentConfig {
    ExperimentConfig {
        action: ActionBlock {
            potential: PotentialName::Free,
            omega: None,
            series,
        },
        lattice: LatticeBlock {
            n_sites: n_sites.to_vec(),
            total_time: 1.0,
            left_endpoint: 0.0,
            right_endpoint: 0.0,
            free_end: false,
            cutoff: None,
            box_width: None,
        },
        sampler: SamplerBlock {
            sweeps: 2000,
            burn_in: 2000,
            thinning: 10,
            seed: 1,
            chains: 2,
            jump_probability: None,
            local_width: None,
            target_acceptance: 0.5,
        },
        analysis: AnalysisBlock::default(),
        output: OutputBlock {
            experiment: name.into(),
            figures: vec![Figure::LengthScaling],
            ..OutputBlock::default()
        },
    }
}

fn naive() -> ExperimentConfig {
    base("naive", &SMALL_N, vec![SeriesSpec::naive()])
}

fn fig1() -> ExperimentConfig {
    let series = [3.0, 4.0, 5.0, 6.0]
        .iter()
        .map(|&a| SeriesSpec::sub_diffusive(2.0, a))
        .collect();
    base("fig1", &LARGE_N, series)
}

fn fig2() -> ExperimentConfig {
    let mut series = Vec::new();
    for xi in [1.0, 2.0, 3.0] {
        for alpha in [2.0, 4.0, 6.0, 8.0, 10.0, 12.0] {
            series.push(SeriesSpec::sub_diffusive(xi, alpha));
        }
    }
    let mut c = base("fig2", &MID_N, series);
    c.output.figures = vec![Figure::DfVsAlpha];
    c
}

fn fig3() -> ExperimentConfig {
    let series = [2.0, 1.0, 0.5, -1.0].iter().map(|&g| SeriesSpec::gamma(g)).collect();
    let mut c = base("fig3", &[1024], series);
    c.lattice.cutoff = Some(1.0);
    c.analysis = AnalysisBlock {
        fit: false,
        histogram: false,
        sample_paths: true,
    };
    c.output.figures = vec![Figure::Paths];
    c
}

fn fig4() -> ExperimentConfig {
    let mut series: Vec<SeriesSpec> = [2.0, 1.0, 0.5].iter().map(|&g| SeriesSpec::gamma(g)).collect();
    series.push(SeriesSpec::gamma(-1.0).with_sites(&BOUNDED_N));
    series.push(SeriesSpec::f(FName::Tanh).with_sites(&BOUNDED_N));
    series.push(SeriesSpec::f(FName::Sin).with_sites(&BOUNDED_N));
    let mut c = base("fig4", &SMALL_N, series);
    c.lattice.cutoff = Some(1.0);
    c
}

fn fig5() -> ExperimentConfig {
    let mut series: Vec<SeriesSpec> = [-2.0, -1.0, -0.5]
        .iter()
        .map(|&g| SeriesSpec::gamma(g).with_sites(&BOUNDED_N))
        .collect();
    series.extend([0.5, 1.0, 2.0, 3.0].iter().map(|&g| SeriesSpec::gamma(g)));
    let mut c = base("fig5", &SMALL_N, series);
    c.lattice.cutoff = Some(1.0);
    c.output.figures = vec![Figure::BetaVsGamma];
    c
}

fn fig6() -> ExperimentConfig {
    let series = vec![
        SeriesSpec::naive(),
        SeriesSpec::sub_diffusive(1.0, 10.0),
        SeriesSpec::gamma(-1.0).with_box(1.0),
        SeriesSpec::uniform(1.0),
    ];
    let mut c = base("fig6", &[512], series);
    c.sampler.sweeps = 20000;
    c.analysis = AnalysisBlock {
        fit: false,
        histogram: true,
        sample_paths: false,
    };
    c.output.figures = vec![Figure::Jaggedness];
    c
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "naive",
        description: "free particle, naive action, N = 64..1024",
        build: naive,
    },
    Preset {
        name: "fig1",
        description: "sub-diffusive length scaling, xi = 2, alpha = 3..6",
        build: fig1,
    },
    Preset {
        name: "fig2",
        description: "fractal dimension against alpha for xi = 1, 2, 3",
        build: fig2,
    },
    Preset {
        name: "fig3",
        description: "sample paths of f_gamma actions, gamma = 2, 1, 0.5, -1",
        build: fig3,
    },
    Preset {
        name: "fig4",
        description: "length scaling of f-modified actions with cutoff L = 1",
        build: fig4,
    },
    Preset {
        name: "fig5",
        description: "length exponent against gamma",
        build: fig5,
    },
    Preset {
        name: "fig6",
        description: "jaggedness histograms at N = 512",
        build: fig6,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
