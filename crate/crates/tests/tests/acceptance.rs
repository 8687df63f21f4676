//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use geocolumn::codec::{
    compute_best_delta_bits, fp_delta_encode_with_width, significant_bits, zigzag_decode, zigzag_encode, BitWriter,
    DeltaHistogram,
};
use geocolumn::columnar::{from_columnar, normalize_orientation, ring_orientation, ColumnarGeometry, RingOrientation};
use geocolumn::format::{inspect, prune_pages, write_file, ColumnId, Compression, FileReader, WriteOptions};
use geocolumn::geometry::coords;
use geocolumn::io::synth::shuffle;
use geocolumn::io::{generate_synthetic, random_geometries, SyntheticSpec};
use geocolumn::sfc::{hilbert_index, z_key};
use geocolumn::{Curve, Geometry, GeometryType, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOMAIN: Rect = Rect { xmin: -180.0, ymin: -90.0, xmax: 180.0, ymax: 90.0 };

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn write(records: &[Geometry], opts: &WriteOptions) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_file(&mut bytes, records.iter().cloned(), opts).expect("write");
    bytes
}

/// Shared 1M-point clustered dataset, in generator order (i.i.d. draws).
struct Clustered {
    points: Vec<Geometry>,
}

impl Clustered {
    fn new() -> Self {
        let spec = SyntheticSpec { count: 1_000_000, clusters: 100, bbox: DOMAIN, seed: 42, ..Default::default() }
            .with_relative_stddev(0.01);
        let mut points: Vec<Geometry> = generate_synthetic(&spec).expect("spec").collect();
        shuffle(&mut points, 43);
        Clustered { points }
    }
}

fn coordinate_bytes(reader: &FileReader<Vec<u8>>) -> (u64, u64) {
    let mut stored = 0;
    let mut coords = 0;
    for rg in &reader.footer().row_groups {
        for id in [ColumnId::X, ColumnId::Y] {
            stored += rg.chunk(id).expect("chunk").stored_bytes();
        }
        coords += rg.coord_count;
    }
    (stored, coords * 16)
}

fn c1_round_trip() -> Outcome {
    let input: Vec<Geometry> = random_geometries(12_000, 2024, true).collect();
    let mut types = [0usize; 7];
    let (mut holes, mut specials) = (0usize, [0usize; 5]);
    for g in &input {
        types[g.geometry_type().expect("type").code() as usize] += 1;
        match g {
            Geometry::Polygon(p) => holes += p.holes().len(),
            Geometry::MultiPolygon(ps) => holes += ps.iter().map(|p| p.holes().len()).sum::<usize>(),
            _ => {}
        }
        g.for_each_coord(&mut |c| {
            for v in [c.x, c.y] {
                if v.is_nan() {
                    specials[0] += 1;
                } else if v == 0.0 && v.is_sign_negative() {
                    specials[1] += 1;
                } else if v.is_infinite() {
                    specials[2] += 1;
                } else if v.is_subnormal() {
                    specials[3] += 1;
                } else if v == 0.0 {
                    specials[4] += 1;
                }
            }
        });
    }
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("corpus.spqf");
    let file = std::fs::File::create(&path).expect("create");
    let opts = WriteOptions { page_size: 4096, with_ids: true, ..Default::default() };
    write_file(std::io::BufWriter::new(file), input.iter().cloned(), &opts).expect("write");
    let reader = FileReader::open(std::fs::File::open(&path).expect("open")).expect("read footer");
    let output = reader.read_all().expect("read");
    let mismatches = input.iter().zip(&output).filter(|(a, b)| normalize_orientation(a) != **b).count()
        + input.len().abs_diff(output.len());
    let covered = types.iter().all(|&n| n > 0) && holes > 0 && specials.iter().all(|&n| n > 0);
    outcome(
        mismatches == 0 && covered,
        format!(
            "{} geometries (per type {:?}, {holes} holes; NaN/-0/inf/subnormal/+0 coords {:?}), {mismatches} mismatches",
            input.len(),
            types,
            specials
        ),
    )
}

/// Random arrays from a mix of distributions.
fn codec_arrays(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let len = (2.0f64 * (5000.0f64).powf(rng.random::<f64>())).round() as usize;
            let len = len.clamp(2, 10_000);
            let base: f64 = rng.random_range(-1000.0..1000.0);
            let step: f64 = 10f64.powi(rng.random_range(-12..3));
            let mut walk = base;
            (0..len)
                .map(|j| match i % 9 {
                    0 => rng.random_range(0..16) as f64,
                    1 => {
                        walk += rng.random_range(-1.0..1.0) * step;
                        walk
                    }
                    2 => base,
                    3 => f64::from_bits(rng.random::<u64>()),
                    4 => {
                        if j % 2 == 0 {
                            1e300
                        } else {
                            -1e-300
                        }
                    }
                    5 => base + (j as f64 * 0.01).sin(),
                    6 => (base * 1e7).round() / 1e7 + (rng.random_range(0..1000) as f64) * 1e-7,
                    7 => {
                        if rng.random_bool(0.01) {
                            f64::from_bits(rng.random::<u64>())
                        } else {
                            base + j as f64 * step
                        }
                    }
                    _ => {
                        // deltas landing exactly on the reset marker of some widths
                        let w = rng.random_range(1..20u32);
                        let z = (1u64 << w) - 1;
                        walk = f64::from_bits((walk.to_bits() as i64).wrapping_add(zigzag_decode(z)) as u64);
                        walk
                    }
                })
                .collect()
        })
        .collect()
}

fn encoded_bits(values: &[f64], width: u32) -> u64 {
    let mut w = BitWriter::new();
    fp_delta_encode_with_width(values, width, &mut w);
    w.bit_len()
}

fn c2_optimality() -> Outcome {
    let arrays = codec_arrays(1000, 7);
    let mut failures = 0;
    let mut first = String::new();
    for (i, a) in arrays.iter().enumerate() {
        let sizes: Vec<u64> = (1..=64).map(|n| encoded_bits(a, n)).collect();
        let best = *sizes.iter().min().expect("64 widths");
        let chosen = compute_best_delta_bits(a);
        if sizes[chosen as usize - 1] != best {
            failures += 1;
            if first.is_empty() {
                first = format!("; first failure array {i}: n*={chosen} costs {} vs min {best}", sizes[chosen as usize - 1]);
            }
        }
    }
    outcome(failures == 0, format!("{} arrays x 64 widths, {failures} where n* was not minimal{first}", arrays.len()))
}

fn c3_size_formula() -> Outcome {
    let mut arrays = codec_arrays(1000, 8);
    let synthetic: Vec<f64> = generate_synthetic(&SyntheticSpec { count: 20_000, ..Default::default() })
        .expect("spec")
        .filter_map(|g| match g {
            Geometry::Point(p) => Some(p.x),
            _ => None,
        })
        .collect();
    arrays.push(synthetic);
    let mut failures = 0;
    let mut total_collisions = 0u64;
    for a in &arrays {
        let n = compute_best_delta_bits(a);
        let zs: Vec<u64> = a.windows(2).map(|w| zigzag_encode((w[1].to_bits() as i64).wrapping_sub(w[0].to_bits() as i64))).collect();
        // histogram and suffix sums straight from the definition
        let mut h = [0u64; 65];
        for &z in &zs {
            h[significant_bits(z) as usize] += 1;
        }
        let mut suffix = [0u64; 66];
        for k in (0..=64).rev() {
            suffix[k] = suffix[k + 1] + h[k];
        }
        let s = n as u64 * zs.len() as u64 + 64 * suffix[n as usize + 1];
        let collisions = zs.iter().filter(|&&z| (n < 64 && z == (1u64 << n) - 1) || (n == 64 && z == u64::MAX)).count() as u64;
        total_collisions += collisions;
        let body = encoded_bits(a, n) - 8 - 64;
        if body != s + 64 * collisions {
            failures += 1;
        }
        if DeltaHistogram::from_values(a).bins != h {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{} arrays, {total_collisions} marker collisions counted, {failures} mismatches", arrays.len()),
    )
}

fn c4_ratio(data: &Clustered, hilbert: &FileReader<Vec<u8>>) -> Outcome {
    let (stored, raw) = coordinate_bytes(hilbert);
    let ratio = stored as f64 / raw as f64;
    outcome(
        ratio <= 0.5,
        format!(
            "{} points, Hilbert-sorted, default pages: FP-delta x+y payload {stored} B vs raw {raw} B, ratio {ratio:.3} (target <= 0.5)",
            data.points.len()
        ),
    )
}

fn c5_pruning(data: &Clustered, sorted: &FileReader<Vec<u8>>, unsorted: &FileReader<Vec<u8>>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (w, h) = (DOMAIN.width() * 0.01, DOMAIN.height() * 0.01);
    let key = |g: &Geometry| match g {
        Geometry::Point(p) => p.bits(),
        _ => unreachable!("points only"),
    };
    let mut wrong = 0;
    let mut sorted_ratio = 0.0;
    let mut unsorted_ratio = 0.0;
    let mut hits = 0;
    let queries = 100;
    for i in 0..queries {
        let x = rng.random_range(DOMAIN.xmin..DOMAIN.xmax - w);
        let y = rng.random_range(DOMAIN.ymin..DOMAIN.ymax - h);
        let q = Rect::new(x, y, x + w, y + h).expect("rect");
        let res = sorted.range_query(&q).expect("query");
        let mut got: Vec<_> = res.records.iter().map(|r| key(&r.geometry)).collect();
        let mut want: Vec<_> =
            data.points.iter().filter(|g| g.mbr().is_some_and(|m| m.intersects(&q))).map(key).collect();
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            wrong += 1;
        }
        if i < 3 {
            let mut twin: Vec<_> = unsorted.range_query(&q).expect("query").records.iter().map(|r| key(&r.geometry)).collect();
            twin.sort_unstable();
            if twin != want {
                wrong += 1;
            }
        }
        hits += want.len();
        sorted_ratio += res.pages_selected as f64 / res.pages_total as f64;
        let plan = prune_pages(unsorted.footer(), &q);
        unsorted_ratio += plan.slots_selected() as f64 / plan.slots_total as f64;
    }
    sorted_ratio /= queries as f64;
    unsorted_ratio /= queries as f64;
    let factor = if sorted_ratio > 0.0 { unsorted_ratio / sorted_ratio } else { f64::INFINITY };
    outcome(
        wrong == 0 && sorted_ratio <= 0.05 && factor >= 5.0,
        format!(
            "{queries} queries ({hits} hits), {wrong} oracle mismatches; mean pages selected/total: sorted {sorted_ratio:.4}, unsorted {unsorted_ratio:.4} ({factor:.1}x); {} page slots",
            sorted.footer().page_slot_count()
        ),
    )
}

fn c6_histogram(sorted: &FileReader<Vec<u8>>, unsorted: &FileReader<Vec<u8>>) -> Outcome {
    let s = inspect(sorted).expect("inspect").x_histogram;
    let u = inspect(unsorted).expect("inspect").x_histogram;
    let (s64, u64_) = (s.at_least[64], u.at_least[64]);
    let pass = s.mean_bits < u.mean_bits && s64 * 10 <= u64_ && u64_ > 0;
    outcome(
        pass,
        format!(
            "x deltas mean bits: hilbert {:.2} vs none {:.2}; at-least-64-bit deltas: hilbert {s64} vs none {u64_}",
            s.mean_bits, u.mean_bits
        ),
    )
}

fn c7_type_column(hilbert: &FileReader<Vec<u8>>) -> Outcome {
    let footer = hilbert.footer();
    let sizes: Vec<u64> = footer.row_groups.iter().map(|rg| rg.chunk(ColumnId::Type).expect("type").stored_bytes()).collect();
    let total: u64 = footer.row_groups.iter().map(|rg| rg.record_count).sum();
    outcome(
        total == 1_000_000 && sizes.iter().all(|&b| b <= 16),
        format!("{total} Point records in {} row group(s), TYPE chunk bytes {sizes:?}", sizes.len()),
    )
}

fn c8_reassembly() -> Outcome {
    let fig6 = ColumnarGeometry::from_parts(
        GeometryType::MultiPolygon,
        &[
            coords(&[(2., 4.), (5., 5.), (5., 2.), (3., 2.), (2., 4.)]),
            coords(&[(3., 3.), (4., 3.), (4., 4.), (3., 3.)]),
            coords(&[(1., 1.), (1., 2.), (3., 1.), (1., 1.)]),
        ],
    );
    let fig3 = ColumnarGeometry::from_parts(
        GeometryType::Polygon,
        &[
            coords(&[(1., 1.), (2., 4.), (5., 5.), (5., 1.), (1., 1.)]),
            coords(&[(3., 2.), (4., 2.), (4., 3.), (3., 2.)]),
        ],
    );
    let holes6 = match from_columnar(&fig6) {
        Ok(Geometry::MultiPolygon(ps)) => ps.iter().map(|p| p.holes().len()).collect::<Vec<_>>(),
        _ => vec![],
    };
    let holes3 = match from_columnar(&fig3) {
        Ok(Geometry::Polygon(p)) => Some(p.holes().len()),
        _ => None,
    };
    outcome(
        holes6 == [1, 0] && holes3 == Some(1),
        format!("multipolygon hole counts {holes6:?}, polygon holes {holes3:?}"),
    )
}

fn c9_vectors() -> Outcome {
    let zig = [(0i64, 0u64), (-1, 1), (1, 2)];
    let zig_ok = zig.iter().all(|&(d, z)| zigzag_encode(d) == z && zigzag_decode(z) == d);
    let order: Vec<u64> = [(0, 0), (0, 1), (1, 1), (1, 0)].iter().map(|&(x, y)| hilbert_index(1, x, y)).collect();
    let z_ok = z_key(0, 0) == 0 && z_key(1, 0) == 1 && z_key(0, 1) == 2 && z_key(1, 1) == 3;
    let shell = [(1., 1.), (2., 4.), (5., 5.), (5., 1.), (1., 1.)];
    let cw = ring_orientation(&coords(&shell)) == RingOrientation::Cw;
    outcome(
        zig_ok && order == [0, 1, 2, 3] && z_ok && cw,
        format!("zigzag {zig_ok}, hilbert order-1 indices {order:?}, z-keys {z_ok}, shell CW {cw}"),
    )
}

fn c10_deflate() -> Outcome {
    let spec = SyntheticSpec { count: 200_000, clusters: 100, bbox: DOMAIN, seed: 10, ..Default::default() }
        .with_relative_stddev(0.01);
    let points: Vec<Geometry> = generate_synthetic(&spec).expect("spec").collect();
    let base = WriteOptions { sort: Curve::Hilbert, ..Default::default() };
    let plain = write(&points, &base);
    let packed = write(&points, &WriteOptions { compression: Compression::Deflate, ..base });
    let a = FileReader::open(plain.clone()).expect("open").read_all().expect("read");
    let b = FileReader::open(packed.clone()).expect("open").read_all().expect("read");
    outcome(
        a == b && packed.len() <= plain.len(),
        format!("identical decode {}; sizes deflate {} B vs none {} B", a == b, packed.len(), plain.len()),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
    });
    println!(
        "criterion {id:>2} {}: {name}: {} [{:.1}s]",
        if result.pass { "PASS" } else { "FAIL" },
        result.detail,
        start.elapsed().as_secs_f64()
    );
    result.pass
}

fn main() {
    let mut results = Vec::new();
    results.push(run(1, "lossless round-trip", c1_round_trip));
    results.push(run(2, "codec width optimality", c2_optimality));
    results.push(run(3, "size formula exactness", c3_size_formula));

    let t = Instant::now();
    let data = Clustered::new();
    let hilbert = FileReader::open(write(&data.points, &WriteOptions { sort: Curve::Hilbert, ..Default::default() }))
        .expect("open");
    let small_pages = WriteOptions { page_size: 64 << 10, ..Default::default() };
    let sorted = FileReader::open(write(&data.points, &WriteOptions { sort: Curve::Hilbert, ..small_pages.clone() }))
        .expect("open");
    let unsorted = FileReader::open(write(&data.points, &small_pages)).expect("open");
    println!("             (1M-point dataset and three files built in {:.1}s)", t.elapsed().as_secs_f64());

    results.push(run(4, "compression ratio on clustered points", || c4_ratio(&data, &hilbert)));
    results.push(run(5, "pruning effectiveness and correctness", || c5_pruning(&data, &sorted, &unsorted)));
    results.push(run(6, "sorting shifts the delta histogram", || c6_histogram(&sorted, &unsorted)));
    results.push(run(7, "constant-size TYPE column", || c7_type_column(&hilbert)));
    results.push(run(8, "multipolygon reassembly", c8_reassembly));
    results.push(run(9, "unit vectors", c9_vectors));
    results.push(run(10, "compression transparency", c10_deflate));

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
