use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use super::{Segment, SegmentError, SegmentSequence};
use crate::labels::Label;

/// Header of the segment CSV format.
pub const CSV_HEADER: [&str; 3] = ["onset_ms", "offset_ms", "label"];

#[derive(serde::Deserialize)]
struct Row {
    onset_ms: usize,
    offset_ms: usize,
    label: String,
}

/// Parses `onset_ms,offset_ms,label` rows. Labels must be lowercase
/// `vot`, `vowel` or `other`.
pub fn segments_from_csv(reader: impl Read) -> Result<SegmentSequence, SegmentError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(SegmentError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "expected header `onset_ms,offset_ms,label`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ))));
    }
    let mut segs = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let label: Label = row
            .label
            .parse()
            .map_err(|source| SegmentError::Label { row: i + 1, source })?;
        segs.push(Segment {
            label,
            onset_ms: row.onset_ms,
            offset_ms: row.offset_ms,
        });
    }
    SegmentSequence::new(segs)
}

pub fn read_segments_csv(path: impl AsRef<Path>) -> Result<SegmentSequence, SegmentError> {
    segments_from_csv(std::fs::File::open(path)?)
}

pub fn segments_to_csv(segs: &SegmentSequence, writer: impl Write) -> Result<(), SegmentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in segs {
        w.write_record([
            s.onset_ms.to_string(),
            s.offset_ms.to_string(),
            s.label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_segments_csv(
    path: impl AsRef<Path>,
    segs: &SegmentSequence,
) -> Result<(), SegmentError> {
    segments_to_csv(segs, std::fs::File::create(path)?)
}

/// Praat TextGrid (long text format) with a single interval tier. Uncovered
/// stretches become intervals with empty text, so the tier tiles
/// `[0, total_ms)`.
pub fn to_textgrid(segs: &SegmentSequence, total_ms: usize, tier_name: &str) -> String {
    let total_ms = total_ms.max(segs.end_ms());
    let mut intervals: Vec<(usize, usize, &str)> = Vec::new();
    let mut cursor = 0;
    for s in segs {
        if s.onset_ms > cursor {
            intervals.push((cursor, s.onset_ms, ""));
        }
        intervals.push((s.onset_ms, s.offset_ms, s.label.as_str()));
        cursor = s.offset_ms;
    }
    if cursor < total_ms || intervals.is_empty() {
        intervals.push((cursor, total_ms.max(cursor), ""));
    }
    let secs = |ms: usize| ms as f64 / 1000.0;
    let mut out = String::new();
    let xmax = secs(total_ms);
    let _ = writeln!(
        out,
        "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n"
    );
    let _ = writeln!(
        out,
        "xmin = 0 \nxmax = {xmax} \ntiers? <exists> \nsize = 1 \nitem []: "
    );
    let _ = writeln!(
        out,
        "    item [1]:\n        class = \"IntervalTier\" \n        name = \"{tier_name}\" "
    );
    let _ = writeln!(
        out,
        "        xmin = 0 \n        xmax = {xmax} \n        intervals: size = {} ",
        intervals.len()
    );
    for (i, (a, b, text)) in intervals.iter().enumerate() {
        let _ = writeln!(out, "        intervals [{}]:", i + 1);
        let _ = writeln!(
            out,
            "            xmin = {} \n            xmax = {} \n            text = \"{text}\" ",
            secs(*a),
            secs(*b)
        );
    }
    out
}
