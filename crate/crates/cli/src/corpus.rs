//! Streams annotation files as batches of grid targets.

use maskcode_core::io::coco::{for_each_record, CocoFilter};
use maskcode_core::io::{record_to_grid, ExclusionTally, InstanceRecord};
use maskcode_core::{BBox, GridMask};
use rayon::prelude::*;

use crate::args::CorpusArgs;
use crate::UsageError;

const BATCH: usize = 8192;

pub struct Sample {
    pub record_id: u64,
    pub image_id: u64,
    pub category_id: i64,
    pub height: usize,
    pub width: usize,
    pub bbox: BBox,
    pub grid: GridMask,
}

#[derive(Debug, Default)]
pub struct CorpusSummary {
    /// Annotations read, crowd ones included.
    pub records: u64,
    pub grids: u64,
    pub excluded: ExclusionTally,
    /// Annotations the loader could not convert at all.
    pub load_errors: u64,
}

pub fn check_mask_size(m: usize) -> anyhow::Result<()> {
    if m < 2 {
        return Err(UsageError(format!("--mask-size must be at least 2, got {m}")).into());
    }
    Ok(())
}

/// Calls `sink` with consecutive batches of grids in file order.
pub fn stream(
    args: &CorpusArgs,
    mut sink: impl FnMut(&[Sample]) -> maskcode_core::Result<()>,
) -> anyhow::Result<CorpusSummary> {
    check_mask_size(args.mask_size)?;
    let filter = CocoFilter {
        categories: None,
        max_count: args.max_count,
        include_crowd: args.include_crowd,
    };
    let mut summary = CorpusSummary::default();
    let mut pending: Vec<InstanceRecord> = Vec::with_capacity(BATCH);
    let m = args.mask_size;
    let mut flush = |pending: &mut Vec<InstanceRecord>, summary: &mut CorpusSummary| {
        let converted: Vec<_> = pending.par_iter().map(|rec| record_to_grid(rec, m)).collect();
        let mut batch = Vec::with_capacity(converted.len());
        for (rec, result) in pending.drain(..).zip(converted) {
            match result {
                Ok(sample) => batch.push(Sample {
                    record_id: rec.id,
                    image_id: rec.image_id,
                    category_id: rec.category_id,
                    height: rec.height,
                    width: rec.width,
                    bbox: sample.bbox,
                    grid: sample.grid,
                }),
                Err(exclusion) => summary.excluded.add(&exclusion.reason),
            }
        }
        summary.grids += batch.len() as u64;
        if batch.is_empty() {
            Ok(())
        } else {
            sink(&batch)
        }
    };
    let loaded = for_each_record(&args.annotations, &filter, |rec| {
        summary.records += 1;
        pending.push(rec);
        if pending.len() == BATCH {
            flush(&mut pending, &mut summary)?;
        }
        Ok(())
    })
    .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", args.annotations.display())))?;
    flush(&mut pending, &mut summary)?;
    summary.records += loaded.crowd_skipped;
    summary.excluded.crowd += loaded.crowd_skipped;
    summary.load_errors = loaded.errors.len() as u64;
    for e in &loaded.errors {
        match e.annotation_id {
            Some(id) => eprintln!("warning: annotation {id}: {}", e.message),
            None => eprintln!("warning: {}", e.message),
        }
    }
    Ok(summary)
}

/// Loads every grid into memory.
pub fn collect(args: &CorpusArgs) -> anyhow::Result<(Vec<Sample>, CorpusSummary)> {
    let mut all = Vec::new();
    let summary = stream(args, |batch| {
        all.extend(batch.iter().map(|s| Sample {
            grid: s.grid.clone(),
            ..*s
        }));
        Ok(())
    })?;
    Ok((all, summary))
}
