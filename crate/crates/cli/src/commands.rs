use std::io::Write;
use std::path::Path;

use neurotopo_core::image::pnm::{encode_pgm, load_image, ChannelTag, LoadedImage, PgmEncoding};
use neurotopo_core::image::{band_threshold, label_components, Connectivity};
use neurotopo_core::persistence::{build_filtration, default_levels, persistent_homology, zigzag_h0, Direction};
use neurotopo_core::pipelines::{
    count_nuclei, count_synapses, extract_structure, locate_neurons, AxisCriterion, IntensityRange, LocateParams,
    NucleusParams, RoiPolyline, StructureParams,
};
use neurotopo_core::{
    apply_field, betti_mod2, build_complex, build_greedy_dvf, homology_integral, BinaryImage, GrayImage, ImageStack,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::{
    AxisMode, Cli, Command, HomologyArgs, LocateArgs, Method, NucleiArgs, PersistenceArgs, StructureArgs, SynapsesArgs,
    ZigzagArgs,
};

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Synapses(a) => synapses(a, out),
        Command::Nuclei(a) => nuclei(a, out),
        Command::Locate(a) => locate(a, out),
        Command::Structure(a) => structure(a, out),
        Command::Homology(a) => homology(a, cli.jobs, out),
        Command::Persistence(a) => persistence(a, cli.jobs, out),
        Command::Zigzag(a) => zigzag(a, out),
    }
}

fn load(path: &Path) -> Result<LoadedImage, CliError> {
    load_image(path).map_err(|e| match CliError::from(e) {
        CliError::Input { code, message } => CliError::input(code, format!("{}: {message}", path.display())),
        other => other,
    })
}

/// The channel tagged `tag` of a PAM, otherwise the first channel.
fn load_channel(path: &Path, tag: ChannelTag) -> Result<GrayImage, CliError> {
    let img = load(path)?;
    Ok(match img.channel(tag) {
        Some(ch) => ch.clone(),
        None => img.into_gray(),
    })
}

fn load_slices(path: &Path) -> Result<Vec<GrayImage>, CliError> {
    Ok(match load(path)? {
        LoadedImage::Gray(img) => vec![img],
        LoadedImage::Channels(chs) => chs.into_iter().map(|c| c.image).collect(),
    })
}

fn load_mask(path: &Path, threshold: u8) -> Result<BinaryImage, CliError> {
    Ok(band_threshold(&load_channel(path, ChannelTag::Gray)?, threshold, 255)?)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::input("unwritable-output", format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::input("unwritable-output", format!("standard output: {e}")))
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn pool(jobs: u16) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .map_err(|e| CliError::parameter("invalid-parameter", format!("cannot start {jobs} workers: {e}")))
}

fn range(text: &str) -> Result<IntensityRange, CliError> {
    text.parse().map_err(|_| {
        CliError::parameter(
            "invalid-range",
            format!("expected LO:HI with 0 <= LO <= HI <= 255, got '{text}'"),
        )
    })
}

fn levels_or_default(levels: &[u8]) -> Vec<u8> {
    if levels.is_empty() {
        default_levels(8)
    } else {
        levels.to_vec()
    }
}

fn synapses(a: &SynapsesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let red_range = range(&a.red_range)?;
    let green_range = range(&a.green_range)?;
    let red = load_channel(&a.red, ChannelTag::Red)?;
    let green = load_channel(&a.green, ChannelTag::Green)?;
    let roi_text = std::fs::read_to_string(&a.roi)
        .map_err(|e| CliError::input("unreadable-input", format!("{}: {e}", a.roi.display())))?;
    let roi = RoiPolyline::from_json(&roi_text)
        .map_err(|e| CliError::input("malformed-roi", format!("{}: {e}", a.roi.display())))?;
    let calibration = a.calib.or(red.calibration()).ok_or_else(|| {
        CliError::parameter(
            "missing-calibration",
            "no --calib given and the red image carries no calibration",
        )
    })?;
    let report = count_synapses(&red, &green, &roi, red_range, green_range, calibration)?;
    let csv = format!(
        "{}\n{}\n",
        neurotopo_core::pipelines::SynapseReport::CSV_HEADER,
        report.csv_row()
    );
    if let Some(p) = &a.out_json {
        write_file(p, to_json(&report))?;
    }
    if let Some(p) = &a.out_csv {
        write_file(p, &csv)?;
    }
    if let (Some(p), Some(mask)) = (&a.out_mask, &report.marked) {
        write_file(p, encode_pgm(&mask.to_gray()?, PgmEncoding::Raw))?;
    }
    emit(out, &csv)
}

fn nuclei(a: &NucleiArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = NucleusParams {
        min_area: a.min_area,
        max_area: a.max_area,
        axis: match a.axis {
            AxisMode::Ratio => AxisCriterion::Ratio(a.axis_limit),
            AxisMode::Difference => AxisCriterion::Difference(a.axis_limit),
        },
        radii: a.radii.clone(),
        nuclei_threshold: a.nuclei_threshold,
        neuron_threshold: a.neuron_threshold,
        median_radius: a.median_radius,
    };
    params.validate()?;
    let nuclei = load_channel(&a.nuclei, ChannelTag::Blue)?;
    let neurons = load_channel(&a.neurons, ChannelTag::Green)?;
    let report = count_nuclei(&nuclei, &neurons, &params)?;
    if let Some(p) = &a.out_json {
        write_file(p, to_json(&report))?;
    }
    if let Some(p) = &a.out_csv {
        write_file(p, report.to_csv())?;
    }
    let radii = params
        .radii
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let axis = match params.axis {
        AxisCriterion::Ratio(l) => format!("ratio:{l}"),
        AxisCriterion::Difference(l) => format!("difference:{l}"),
    };
    emit(
        out,
        &format!(
            "total_cells={} neuron_count={} rejected={}\nmin-area={} max-area={} axis={axis} radii={radii} nuclei-threshold={} neuron-threshold={} median-radius={}\n",
            report.total_cells,
            report.neuron_count,
            report.rejected.len(),
            params.min_area,
            params.max_area,
            params.nuclei_threshold,
            params.neuron_threshold,
            params.median_radius,
        ),
    )
}

fn locate(a: &LocateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = LocateParams {
        tile: a.tile,
        min_path: a.min_path,
        max_gap: a.max_gap,
        seed_threshold: a.seed_threshold,
        foreground_threshold: a.foreground_threshold,
    };
    let img = load_channel(&a.input, ChannelTag::Gray)?;
    let report = locate_neurons(&img, &params)?;
    if let Some(p) = &a.out_json {
        write_file(p, to_json(&report))?;
    }
    if let Some(p) = &a.out_boxes {
        let mut annotated = img.clone();
        for b in &report.boxes {
            let (x0, y0, w, h) = b.rect;
            for x in x0..x0 + w {
                annotated.set(x, y0, 255);
                annotated.set(x, y0 + h - 1, 255);
            }
            for y in y0..y0 + h {
                annotated.set(x0, y, 255);
                annotated.set(x0 + w - 1, y, 255);
            }
        }
        write_file(p, encode_pgm(&annotated, PgmEncoding::Raw))?;
    }
    emit(out, &report.to_csv())
}

fn structure(a: &StructureArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut slices = Vec::new();
    for p in &a.inputs {
        slices.extend(load_slices(p)?);
    }
    let params = StructureParams {
        levels: levels_or_default(&a.levels),
        min_persistence: a.min_persistence,
        median_radius: a.median_radius,
    };
    let result = extract_structure(&ImageStack::new(slices)?, &params)?;
    let mask = result.structure();
    if let Some(p) = &a.out {
        write_file(p, encode_pgm(&mask.to_gray()?, PgmEncoding::Raw))?;
    }
    if let Some(p) = &a.out_barcode {
        write_file(p, result.barcode.to_csv())?;
    }
    if let Some(p) = &a.out_json {
        write_file(p, to_json(&result))?;
    }
    let components = label_components(mask, Connectivity::Eight).count();
    emit(out, &format!("components={components} pixels={}\n", mask.count()))
}

fn betti(mask: &BinaryImage, method: Method) -> Result<String, CliError> {
    let cx = build_complex(mask);
    Ok(match method {
        Method::Dvf => {
            let crit =
                apply_field(&cx, &build_greedy_dvf(&cx)).map_err(|e| CliError::parameter("overflow", e.to_string()))?;
            let (b0, b1) = crit.betti_mod2();
            format!("b0={b0} b1={b1}")
        }
        Method::Mod2 => {
            let (b0, b1) = betti_mod2(&cx);
            format!("b0={b0} b1={b1}")
        }
        Method::Integral => {
            let h = homology_integral(&cx).map_err(|e| CliError::parameter("overflow", e.to_string()))?;
            let mut s = format!("b0={} b1={}", h.betti0, h.betti1);
            if !h.torsion[1].is_empty() {
                let t = h.torsion[1]
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                s += &format!(" torsion1={t}");
            }
            s
        }
    })
}

fn homology(a: &HomologyArgs, jobs: u16, out: &mut dyn Write) -> Result<(), CliError> {
    let lines = pool(jobs)?.install(|| {
        a.inputs
            .par_iter()
            .map(|p| betti(&load_mask(p, a.threshold)?, a.method))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut text = String::new();
    for (p, line) in a.inputs.iter().zip(lines) {
        if a.inputs.len() > 1 {
            text += &format!("{} ", p.display());
        }
        text += &line;
        text.push('\n');
    }
    emit(out, &text)
}

fn persistence(a: &PersistenceArgs, jobs: u16, out: &mut dyn Write) -> Result<(), CliError> {
    let direction = if a.sublevel {
        Direction::Sublevel
    } else {
        Direction::Superlevel
    };
    let levels = if a.levels.is_empty() && a.sublevel {
        let mut l = default_levels(8);
        l.reverse();
        l
    } else {
        levels_or_default(&a.levels)
    };
    let tables = pool(jobs)?.install(|| {
        a.inputs
            .par_iter()
            .map(|p| {
                let img = load_channel(p, ChannelTag::Gray)?;
                Ok(persistent_homology(&build_filtration(&img, &levels, direction)?).to_csv())
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let text = if a.inputs.len() == 1 {
        tables.into_iter().next().unwrap_or_default()
    } else {
        let mut text = String::new();
        for (i, (p, csv)) in a.inputs.iter().zip(&tables).enumerate() {
            let mut lines = csv.lines();
            let header = lines.next().unwrap_or_default();
            if i == 0 {
                text += &format!("input,{header}\n");
            }
            for l in lines {
                text += &format!("{},{l}\n", p.display());
            }
        }
        text
    };
    match &a.out {
        Some(p) => write_file(p, text),
        None => emit(out, &text),
    }
}

fn zigzag(a: &ZigzagArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut masks = Vec::new();
    for p in &a.inputs {
        for s in load_slices(p)? {
            masks.push(band_threshold(&s, a.threshold, 255)?);
        }
    }
    let text = zigzag_h0(&masks)?.to_csv();
    match &a.out {
        Some(p) => write_file(p, text),
        None => emit(out, &text),
    }
}
