//! Plain-text pipeline description.
//!
//! ```text
//! # comments and blank lines are ignored
//! pipeline id=200
//! stage name=range kind=preprocess
//! stage name=pred  kind=predict predictor=interp radius=512 anchor_stride=16
//! stage name=hist  kind=analysis histogram=topk k=16
//! stage name=huff  kind=primary codec=huffman
//! stage name=pack  kind=secondary codec_id=0
//! ```
//!
//! One `pipeline` line, then one `stage` line per stage in order. Every stage
//! needs `name=` and `kind=`; the remaining `key=value` pairs are stage
//! parameters and are checked at registration.

use std::collections::BTreeMap;

use super::{PipelineError, PipelineSpec, StageKind, StageSpec};

fn err(line: usize, msg: impl Into<String>) -> PipelineError {
    PipelineError::Config {
        line,
        msg: msg.into(),
    }
}

fn pairs(line_no: usize, words: &[&str]) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key=value, got {w:?}")))?;
        if k.is_empty() || v.is_empty() {
            return Err(err(line_no, format!("empty key or value in {w:?}")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(line_no, format!("key {k:?} given twice")));
        }
    }
    Ok(out)
}

pub fn parse_pipeline_config(text: &str) -> Result<PipelineSpec, PipelineError> {
    let mut id = None;
    let mut stages = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "pipeline" => {
                if id.is_some() {
                    return Err(err(line_no, "second pipeline line"));
                }
                let mut kv = pairs(line_no, &words[1..])?;
                let v = kv
                    .remove("id")
                    .ok_or_else(|| err(line_no, "pipeline line needs id="))?;
                if let Some(k) = kv.keys().next() {
                    return Err(err(line_no, format!("unknown pipeline key {k:?}")));
                }
                id = Some(
                    v.parse::<u8>()
                        .map_err(|_| err(line_no, format!("id {v:?} is not in 0..=255")))?,
                );
            }
            "stage" => {
                if id.is_none() {
                    return Err(err(line_no, "stage before pipeline line"));
                }
                let mut kv = pairs(line_no, &words[1..])?;
                let name = kv
                    .remove("name")
                    .ok_or_else(|| err(line_no, "stage needs name="))?;
                let kind = kv
                    .remove("kind")
                    .ok_or_else(|| err(line_no, "stage needs kind="))?;
                let kind = StageKind::from_keyword(&kind)
                    .ok_or_else(|| err(line_no, format!("unknown stage kind {kind:?}")))?;
                stages.push(StageSpec {
                    name,
                    kind,
                    params: kv,
                });
            }
            other => return Err(err(line_no, format!("unknown directive {other:?}"))),
        }
    }
    let id = id.ok_or_else(|| err(0, "missing pipeline line"))?;
    Ok(PipelineSpec { id, stages })
}

/// Inverse of [`parse_pipeline_config`].
pub fn pipeline_to_config(spec: &PipelineSpec) -> String {
    let mut out = format!("pipeline id={}\n", spec.id);
    for s in &spec.stages {
        out.push_str(&format!("stage name={} kind={}", s.name, s.kind.keyword()));
        for (k, v) in &s.params {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# quality-like pipeline
pipeline id=200
stage name=pred kind=predict predictor=interp anchor_stride=8   # coarse
stage name=hist kind=analysis histogram=topk k=8

stage name=huff kind=primary codec=huffman
";

    #[test]
    fn parses_and_round_trips() {
        let spec = parse_pipeline_config(SAMPLE).unwrap();
        assert_eq!(spec.id, 200);
        assert_eq!(spec.stages.len(), 3);
        assert_eq!(spec.stages[0].params["anchor_stride"], "8");
        assert_eq!(spec.stages[1].kind, StageKind::Analysis);
        let again = parse_pipeline_config(&pipeline_to_config(&spec)).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("stage name=a kind=predict", 1),
            ("pipeline id=300", 1),
            ("pipeline id=1\nstage kind=predict", 2),
            ("pipeline id=1\nstage name=a kind=magic", 2),
            ("pipeline id=1\nstage name=a kind=predict radius", 2),
            ("pipeline id=1\nstage name=a kind=predict r=1 r=2", 2),
            ("pipeline id=1\npipeline id=2", 2),
            ("pipeline id=1\nfrobnicate", 2),
            ("", 0),
        ];
        for (text, line) in cases {
            match parse_pipeline_config(text) {
                Err(PipelineError::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
