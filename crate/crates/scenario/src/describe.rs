//! Human-readable report of a finished run container.

use std::fmt::Write;
use std::path::Path;

use tdhf_core::container::Container;
use tdhf_core::units::ev_to_au;

use crate::error::ScenarioError;
use crate::runner::{load_spectrum, visibility_of, RunMetadata};

/// Values behind the report, recomputed from the stored datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub text: String,
    pub visibility: Option<f64>,
    pub datasets: Vec<String>,
}

pub fn describe(path: impl AsRef<Path>) -> Result<Report, ScenarioError> {
    let c = Container::open(path.as_ref())?;
    c.verify()?;
    let meta = RunMetadata::from_manifest(&c.manifest)?;
    let mut t = String::new();
    let w = &mut t;
    let _ = writeln!(w, "run        {}", meta.config.name);
    let _ = writeln!(w, "complete   {}", c.manifest.complete);
    let _ = writeln!(w, "version    {}", meta.code_version);
    let g = &meta.grid;
    let _ = writeln!(w, "grid       {} x {}  dx {:.4} au  dy {:.4} au", g.nx, g.ny, g.dx, g.dy);
    let _ = writeln!(w, "spin mode  {}", meta.spin_mode);
    let _ = writeln!(w, "snapshots  {}", meta.snapshots.len());
    if let Some(e) = &meta.error {
        let _ = writeln!(w, "error      {e}");
    }
    let mut visibility = None;
    if let Some(s) = &meta.summary {
        let _ = writeln!(w, "steps      {}  (final t = {:.3} fs, max lambda dt {:.3})", s.steps, s.final_time_fs, s.max_lambda_dt);
        let _ = writeln!(w, "norms      {:?} -> {:?}", s.initial_norms, s.final_norms);
        let _ = writeln!(w, "energy     {:.9} eV -> {:.9} eV", s.initial_energy_ev, s.final_energy_ev);
        for gf in &s.g_factors {
            let _ = writeln!(w, "g-factor   electron {}: |g| = {:.4e} (kx {:.4e} au)", gf.electron, gf.abs, gf.kx);
        }
        if let Some(span) = s.spectrum_span_ev {
            let _ = writeln!(w, "spectrum   {:.3} .. {:.3} eV", span[0], span[1]);
        }
        if let (Some(v), Some(last)) = (&s.visibility, meta.snapshots.last()) {
            let spec = load_spectrum(&c, &meta, last.index)?;
            let peaks = ((v.band_ev[1] - v.band_ev[0]) / v.photon_ev).round() as usize;
            let again = visibility_of(&spec, ev_to_au(s.reference_energy_ev), ev_to_au(v.photon_ev), peaks);
            visibility = again.value;
            match again.value {
                Some(x) => {
                    let _ = writeln!(w, "visibility {x:.6} over {:.3} .. {:.3} eV", v.band_ev[0], v.band_ev[1]);
                }
                None => {
                    let _ = writeln!(w, "visibility n/a ({})", again.note.unwrap_or_default());
                }
            }
            if let Some(sp) = again.comb_spacing_ev {
                let _ = writeln!(w, "comb       {sp:.4} eV spacing");
            }
        }
    }
    let datasets: Vec<String> = c.manifest.datasets.iter().map(|d| d.name.clone()).collect();
    let _ = writeln!(w, "datasets   {}", datasets.len());
    for d in &c.manifest.datasets {
        let _ = writeln!(w, "  {:<40} {:?} {:?}", d.name, d.dtype, d.shape);
    }
    Ok(Report { text: t, visibility, datasets })
}
