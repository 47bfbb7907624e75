use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use maskcode_core::eval::{
    compare_codecs, emit_class_split, emit_codec_report, emit_curve, ClassSplitAccumulator, CurveAccumulator,
    GridCodec, IdentityCodec, PcaCodec, PolarCodec, ReportFormat,
};
use maskcode_core::io::coco::write_coco;
use maskcode_core::io::container::{load_codebook, load_codes_for, save_codebook, save_codes, CodeRecord, RecordKey};
use maskcode_core::io::synth::{synth_records, CorpusSpec, ShapeFamily};
use maskcode_core::mask::{paste, rle_encode};
use maskcode_core::{solve, Codebook, FitAccumulator, ScaleMode, WhitenMode};
use rayon::prelude::*;

use crate::args::{CompareArgs, CorpusArgs, DecodeArgs, EncodeArgs, FitArgs, FitOptions, SweepArgs, SynthArgs};
use crate::corpus::{self, CorpusSummary, Sample};
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn check_components(n: usize, m: usize) -> anyhow::Result<()> {
    if n == 0 || n > m * m {
        return Err(usage(format!("--components must lie in 1..={} for --mask-size {m}, got {n}", m * m)));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn accumulate(batch: &[Sample], m: usize) -> FitAccumulator {
    batch
        .par_iter()
        .fold(
            || FitAccumulator::new(m),
            |mut acc, s| {
                acc.accumulate(&s.grid).expect("grid side matches accumulator");
                acc
            },
        )
        .reduce(
            || FitAccumulator::new(m),
            |mut a, b| {
                a.merge(&b).expect("accumulators share a side");
                a
            },
        )
}

struct Fitted {
    agnostic: FitAccumulator,
    per_category: BTreeMap<i64, FitAccumulator>,
    summary: CorpusSummary,
}

fn fit_pass(corpus: &CorpusArgs, class_specific: bool) -> anyhow::Result<Fitted> {
    let m = corpus.mask_size;
    let mut agnostic = FitAccumulator::new(m);
    let mut per_category: BTreeMap<i64, FitAccumulator> = BTreeMap::new();
    let summary = corpus::stream(corpus, |batch| {
        agnostic.merge(&accumulate(batch, m))?;
        if class_specific {
            let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for (i, s) in batch.iter().enumerate() {
                groups.entry(s.category_id).or_default().push(i);
            }
            for (cat, idx) in groups {
                let part: Vec<&Sample> = idx.iter().map(|&i| &batch[i]).collect();
                let mut acc = FitAccumulator::new(m);
                for s in part {
                    acc.accumulate(&s.grid)?;
                }
                per_category.entry(cat).or_insert_with(|| FitAccumulator::new(m)).merge(&acc)?;
            }
        }
        Ok(())
    })?;
    Ok(Fitted {
        agnostic,
        per_category,
        summary,
    })
}

fn solve_with(acc: &FitAccumulator, n: usize, opts: &FitOptions) -> maskcode_core::Result<Codebook> {
    solve(acc, n, WhitenMode::from(opts.whiten), ScaleMode::from(opts.scale))
}

fn print_summary(out: &mut impl Write, summary: &CorpusSummary) -> io::Result<()> {
    writeln!(out, "records {}", summary.records)?;
    writeln!(out, "grids {}", summary.grids)?;
    writeln!(out, "excluded_crowd {}", summary.excluded.crowd)?;
    writeln!(out, "excluded_empty {}", summary.excluded.empty)?;
    writeln!(out, "excluded_invalid {}", summary.excluded.invalid)?;
    writeln!(out, "load_errors {}", summary.load_errors)
}

fn print_eigenvalues(out: &mut impl Write, label: &str, cb: &Codebook) -> io::Result<()> {
    write!(out, "{label}")?;
    for v in cb.eigenvalues().iter().take(10) {
        write!(out, " {v:.6e}")?;
    }
    writeln!(out)
}

pub fn fit(args: &FitArgs) -> anyhow::Result<()> {
    corpus::check_mask_size(args.corpus.mask_size)?;
    check_components(args.components, args.corpus.mask_size)?;
    let fitted = fit_pass(&args.corpus, args.class_specific)?;
    let agnostic = solve_with(&fitted.agnostic, args.components, &args.fit)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    print_summary(&mut out, &fitted.summary)?;
    writeln!(out, "components {}", args.components)?;
    print_eigenvalues(&mut out, "eigenvalues", &agnostic)?;

    if !args.class_specific {
        return save_codebook(&agnostic, &args.out).with_context(|| format!("writing {}", args.out.display()));
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    save_codebook(&agnostic, args.out.join("agnostic.mec"))?;
    for (cat, acc) in &fitted.per_category {
        let class_id = i32::try_from(*cat).map_err(|_| usage(format!("category id {cat} does not fit in 32 bits")))?;
        let cb = solve_with(acc, args.components, &args.fit)
            .with_context(|| format!("category {cat}"))?
            .with_class_id(Some(class_id));
        writeln!(out, "category {cat} grids {}", acc.count())?;
        print_eigenvalues(&mut out, &format!("category {cat} eigenvalues"), &cb)?;
        save_codebook(&cb, args.out.join(format!("category_{cat}.mec")))?;
    }
    Ok(())
}

fn check_increasing(ns: &[usize]) -> anyhow::Result<()> {
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("--components must be a nonempty increasing list"));
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let m = args.corpus.mask_size;
    corpus::check_mask_size(m)?;
    check_increasing(&args.components)?;
    let max_n = *args.components.last().unwrap();
    check_components(args.components[0], m)?;
    check_components(max_n, m)?;

    let codebook = match &args.codebook {
        Some(path) => {
            let cb = load_codebook(path).with_context(|| format!("reading {}", path.display()))?;
            if cb.side() != m {
                return Err(usage(format!("codebook grid side {} differs from --mask-size {m}", cb.side())));
            }
            if cb.components() < max_n {
                return Err(usage(format!("codebook has {} components, sweep needs {max_n}", cb.components())));
            }
            cb
        }
        None => solve_with(&fit_pass(&args.corpus, false)?.agnostic, max_n, &args.fit)?,
    };
    let mut curve = CurveAccumulator::new(&codebook, &args.components)?;
    corpus::stream(&args.corpus, |batch| {
        let grids: Vec<_> = batch.iter().map(|s| s.grid.clone()).collect();
        curve.add_batch(&codebook, &grids)
    })?;
    let curve = curve.finish()?;
    write_or_print(args.out.as_deref(), &emit_curve(&curve, ReportFormat::Csv))?;
    if let Some(plot) = &args.plot {
        write_file(plot, &emit_curve(&curve, ReportFormat::Svg))?;
    }
    Ok(())
}

pub fn encode(args: &EncodeArgs) -> anyhow::Result<()> {
    let cb = load_codebook(&args.codebook).with_context(|| format!("reading {}", args.codebook.display()))?;
    if cb.side() != args.corpus.mask_size {
        return Err(usage(format!(
            "codebook grid side {} differs from --mask-size {}",
            cb.side(),
            args.corpus.mask_size
        )));
    }
    let mut records = Vec::new();
    let summary = corpus::stream(&args.corpus, |batch| {
        let codes: Vec<_> = batch.par_iter().map(|s| cb.encode(&s.grid)).collect::<Result<_, _>>()?;
        for (s, code) in batch.iter().zip(codes) {
            records.push(CodeRecord {
                key: RecordKey {
                    id: s.record_id,
                    image_id: s.image_id,
                    category_id: s.category_id,
                    height: dim32(s.height)?,
                    width: dim32(s.width)?,
                    bbox: s.bbox,
                },
                code,
            });
        }
        Ok(())
    })?;
    save_codes(cb.components(), &records, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    print_summary(&mut out, &summary)?;
    writeln!(out, "encoded {}", records.len())?;
    Ok(())
}

fn dim32(v: usize) -> maskcode_core::Result<u32> {
    u32::try_from(v).map_err(|_| maskcode_core::Error::InvalidInput(format!("image dimension {v} too large")))
}

pub fn decode(args: &DecodeArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage(format!("--threshold must lie in [0, 1], got {}", args.threshold)));
    }
    let cb = load_codebook(&args.codebook).with_context(|| format!("reading {}", args.codebook.display()))?;
    let records = load_codes_for(&cb, &args.codes).with_context(|| format!("reading {}", args.codes.display()))?;
    let rendered: Vec<String> = records
        .par_iter()
        .map(|r| -> maskcode_core::Result<String> {
            let grid = cb.decode(&r.code, args.threshold)?;
            let (h, w) = (r.key.height as usize, r.key.width as usize);
            let mask = paste(&grid, r.key.bbox, h, w)?;
            let entry = serde_json::json!({
                "id": r.key.id,
                "image_id": r.key.image_id,
                "category_id": r.key.category_id,
                "segmentation": {"size": [h, w], "counts": rle_encode(&mask).to_compressed()},
            });
            Ok(entry.to_string())
        })
        .collect::<Result<_, _>>()?;
    let file = File::create(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    out.write_all(b"[")?;
    for (i, line) in rendered.iter().enumerate() {
        out.write_all(if i == 0 { b"\n" } else { b",\n" })?;
        out.write_all(line.as_bytes())?;
    }
    out.write_all(b"\n]\n")?;
    out.flush()?;
    println!("decoded {}", rendered.len());
    Ok(())
}

enum CodecSpec {
    Pca(usize),
    Polar(usize),
    Identity,
}

fn parse_codec(name: &str) -> anyhow::Result<CodecSpec> {
    let bad = || usage(format!("unknown codec {name:?}; expected pca-<N>, polar-<K> or identity"));
    if name == "identity" {
        return Ok(CodecSpec::Identity);
    }
    let (kind, n) = name.split_once('-').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    match kind {
        "pca" => Ok(CodecSpec::Pca(n)),
        "polar" => Ok(CodecSpec::Polar(n)),
        _ => Err(bad()),
    }
}

pub fn compare(args: &CompareArgs) -> anyhow::Result<()> {
    let m = args.corpus.mask_size;
    corpus::check_mask_size(m)?;
    if args.class_specific {
        return class_split(args);
    }
    let names: Vec<String> = if args.codecs.is_empty() {
        vec![format!("pca-{}", args.components), format!("polar-{}", args.rays)]
    } else {
        args.codecs.clone()
    };
    let specs: Vec<CodecSpec> = names.iter().map(|n| parse_codec(n)).collect::<anyhow::Result<_>>()?;
    let mut max_pca = 0;
    for spec in &specs {
        match *spec {
            CodecSpec::Pca(n) => {
                check_components(n, m)?;
                max_pca = max_pca.max(n);
            }
            CodecSpec::Polar(k) if k < 3 => return Err(usage(format!("polar codecs need at least 3 rays, got {k}"))),
            _ => {}
        }
    }

    let (samples, _) = corpus::collect(&args.corpus)?;
    if samples.is_empty() {
        return Err(usage("corpus has no usable masks"));
    }
    let base = if max_pca == 0 {
        None
    } else {
        Some(match &args.codebook {
            Some(path) => {
                let cb = load_codebook(path).with_context(|| format!("reading {}", path.display()))?;
                if cb.side() != m || cb.components() < max_pca {
                    return Err(usage(format!(
                        "codebook ({} components, side {}) cannot serve pca-{max_pca} at --mask-size {m}",
                        cb.components(),
                        cb.side()
                    )));
                }
                cb
            }
            None => {
                let mut acc = FitAccumulator::new(m);
                for chunk in samples.chunks(8192) {
                    acc.merge(&accumulate(chunk, m))?;
                }
                solve_with(&acc, max_pca, &args.fit)?
            }
        })
    };
    let truncated: Vec<Option<Codebook>> = specs
        .iter()
        .map(|s| match (s, &base) {
            (CodecSpec::Pca(n), Some(cb)) => cb.truncate(*n).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_, _>>()?;
    let pcas: Vec<Option<PcaCodec>> = truncated.iter().map(|c| c.as_ref().map(PcaCodec::new)).collect();
    let polars: Vec<Option<PolarCodec>> = specs
        .iter()
        .map(|s| match s {
            CodecSpec::Polar(k) => Some(PolarCodec { rays: *k }),
            _ => None,
        })
        .collect();
    let codecs: Vec<(String, &dyn GridCodec)> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let codec: &dyn GridCodec = match (&pcas[i], &polars[i]) {
                (Some(p), _) => p,
                (_, Some(p)) => p,
                _ => &IdentityCodec,
            };
            (name.clone(), codec)
        })
        .collect();

    let grids: Vec<_> = samples.iter().map(|s| s.grid.clone()).collect();
    let cats: Vec<i64> = samples.iter().map(|s| s.category_id).collect();
    let report = compare_codecs(&grids, Some(&cats), &codecs)?;
    write_or_print(args.out.as_deref(), &emit_codec_report(&report))
}

fn class_split(args: &CompareArgs) -> anyhow::Result<()> {
    let m = args.corpus.mask_size;
    check_components(args.components, m)?;
    let fitted = fit_pass(&args.corpus, true)?;
    let agnostic = solve_with(&fitted.agnostic, args.components, &args.fit)?;
    let specific: BTreeMap<i64, Codebook> = fitted
        .per_category
        .iter()
        .map(|(cat, acc)| {
            solve_with(acc, args.components, &args.fit)
                .map(|cb| (*cat, cb))
                .with_context(|| format!("category {cat}"))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut acc = ClassSplitAccumulator::new(&agnostic, &specific, args.components)?;
    corpus::stream(&args.corpus, |batch| {
        let tagged: Vec<_> = batch.iter().map(|s| (s.grid.clone(), s.category_id)).collect();
        acc.add_batch(&tagged)
    })?;
    write_or_print(args.out.as_deref(), &emit_class_split(&acc.finish()?))
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let families: Vec<ShapeFamily> = args
        .families
        .iter()
        .map(|f| f.parse().map_err(|e: maskcode_core::Error| usage(e.to_string())))
        .collect::<anyhow::Result<_>>()?;
    let spec = CorpusSpec {
        families,
        count_per_family: args.count,
        grid_side: args.mask_size,
        image_size: args.image_size,
        seed: args.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let records: Vec<_> = synth_records(&spec)?.collect();
    let mut categories: Vec<(i64, String)> =
        spec.families.iter().map(|f| (f.category_id(), f.name().to_string())).collect();
    categories.sort();
    categories.dedup();
    let file = File::create(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    write_coco(&records, &categories, BufWriter::new(file))?;
    println!("records {}", records.len());
    Ok(())
}
