//! File-level round trips: traces, instances, LIBSVM data and run configs.

use std::fs;

use ifb_core::io::{
    load_instance, parse_libsvm, read_trace, save_instance, trace_rows, write_libsvm, write_trace, LibsvmData,
    ProblemSpec, RunConfig, TraceFormat, TRACE_COLUMNS,
};
use ifb_core::problems::{gen_lasso_data, gen_logistic_data, gen_qp_data, LogisticGenParams};
use ifb_core::schedules::{Schedule, ScheduleKind};
use ifb_core::solver::{run_ifb, run_ifb_adapm, Modification, SolverOptions};
use ifb_core::Error;

fn adapm_trace() -> ifb_core::solver::Trace {
    let p = gen_lasso_data(40, 80, 5, 9).unwrap().build().unwrap();
    let opts = SolverOptions {
        tol: 1e-6,
        modification: Modification::Both,
        ..SolverOptions::default()
    };
    run_ifb_adapm(&p, &Schedule::new(ScheduleKind::Power { r: 8.0, a: 4.0 }).unwrap(), &opts).unwrap()
}

#[test]
fn trace_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut trace = adapm_trace();
    trace.f_star = Some(trace.final_record().objective - 1e-9);
    let rows = trace_rows(&trace);
    for format in [TraceFormat::Csv, TraceFormat::JsonLines] {
        let path = dir.path().join(format!("trace.{format}"));
        write_trace(&trace, &path, format).unwrap();
        let back = read_trace(&path, format).unwrap();
        assert_eq!(back.len(), rows.len());
        assert!(back.iter().zip(&rows).all(|(a, b)| a.bits_eq(b)), "{format}");
    }
}

#[test]
fn csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let trace = adapm_trace();
    assert!(trace.modified_count() > 0);
    let path = dir.path().join("t.csv");
    write_trace(&trace, &path, TraceFormat::Csv).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, TRACE_COLUMNS);
    let col = TRACE_COLUMNS.iter().position(|c| *c == "modified").unwrap();
    let mut sum = 0;
    let mut n = 0;
    for rec in rd.records() {
        sum += rec.unwrap()[col].parse::<usize>().unwrap();
        n += 1;
    }
    assert_eq!(n, trace.records.len());
    assert_eq!(sum, trace.modified_count());
}

#[test]
fn converged_start_gives_one_row() {
    let p = gen_qp_data(4, 1).unwrap().build().unwrap();
    let x = run_ifb(
        &p,
        &Schedule::new(ScheduleKind::FistaClassic).unwrap(),
        &SolverOptions {
            tol: 1e-12,
            ..SolverOptions::default()
        },
    )
    .unwrap()
    .final_x;
    let t = run_ifb(
        &p,
        &Schedule::new(ScheduleKind::FistaClassic).unwrap(),
        &SolverOptions {
            tol: 1e-6,
            x0: Some(x),
            ..SolverOptions::default()
        },
    )
    .unwrap();
    assert_eq!(t.records.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_trace(&t, &path, TraceFormat::Csv).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[test]
fn io_errors_carry_the_path() {
    let trace = adapm_trace();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("t.csv");
    match write_trace(&trace, &bad, TraceFormat::Csv) {
        Err(Error::Io { path, .. }) => assert_eq!(path, bad),
        other => panic!("{other:?}"),
    }
    for err in [
        read_trace(&bad, TraceFormat::Csv).unwrap_err(),
        load_instance(&bad).unwrap_err(),
        parse_libsvm(&bad).unwrap_err(),
        RunConfig::load(&bad).unwrap_err(),
    ] {
        assert!(matches!(&err, Error::Io { path, .. } if *path == bad), "{err:?}");
        assert!(err.to_string().contains("missing"));
    }
}

#[test]
fn malformed_inputs_are_parse_errors_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let trace = adapm_trace();
    write_trace(&trace, &path, TraceFormat::Csv).unwrap();
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("7,not-a-number,,1,0,1,0,0\n");
    fs::write(&path, text).unwrap();
    match read_trace(&path, TraceFormat::Csv) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, trace.records.len() + 2),
        other => panic!("{other:?}"),
    }

    let inst = dir.path().join("i.json");
    fs::write(&inst, "{\n\"kind\": 3\n").unwrap();
    assert!(matches!(load_instance(&inst), Err(Error::Parse { .. })));

    let data = dir.path().join("d.svm");
    fs::write(&data, "+1 1:0.5\n-1 0:2\n").unwrap();
    assert!(matches!(parse_libsvm(&data), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn instances_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for data in [
        gen_lasso_data(20, 40, 3, 5).unwrap(),
        gen_qp_data(10, 5).unwrap(),
        gen_logistic_data(&LogisticGenParams::default(), 5).unwrap(),
    ] {
        let path = dir.path().join("inst.json");
        save_instance(&data, &path).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(back, data);
        let x = vec![0.3; back.build().unwrap().dimension()];
        assert_eq!(
            back.build().unwrap().objective(&x).to_bits(),
            data.build().unwrap().objective(&x).to_bits()
        );
    }
}

#[test]
fn libsvm_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ifb_core::problems::InstanceData::Logistic { features, labels, .. } =
        gen_logistic_data(&LogisticGenParams::default(), 2).unwrap()
    else {
        unreachable!()
    };
    let ifb_core::problems::DesignMatrix::Dense(d) = features else {
        unreachable!()
    };
    let rows: Vec<Vec<(usize, f64)>> = (0..labels.len())
        .map(|i| d.row(i).iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
        .collect();
    let cols = d.row(0).len();
    let data = LibsvmData {
        features: ifb_core::problems::CsrMatrix::from_rows(cols, &rows).unwrap(),
        labels,
    };
    let path = dir.path().join("synthetic.svm");
    write_libsvm(&path, &data).unwrap();
    let back = parse_libsvm(&path).unwrap();
    assert_eq!(back.labels, data.labels);
    for i in 0..data.labels.len() {
        assert_eq!(back.features.row(i), data.features.row(i));
    }

    // The same file as a problem source.
    let spec = ProblemSpec::Libsvm {
        path: path.clone(),
        delta: 1e-2,
        lipschitz: Default::default(),
    };
    let p = spec.instance_data(1).unwrap().build().unwrap();
    assert_eq!(p.dimension(), cols);
}

#[test]
fn config_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "seed = 7\nschedule = \"exp:0.5\"\nalgorithm = \"adapm\"\n\n[problem]\nkind = \"lasso\"\nm = 30\nn = 60\ns = 4\n\n[solver]\ntol = 1e-7\nmodification = \"gradient\"\n",
    )
    .unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.solver.tol, 1e-7);
    assert_eq!(cfg.solver.modification, Modification::Gradient);
    assert!(matches!(cfg.problem, ProblemSpec::Lasso { delta, .. } if delta == 1.0));
    let saved = dir.path().join("again.toml");
    cfg.save(&saved).unwrap();
    assert_eq!(RunConfig::load(&saved).unwrap(), cfg);

    fs::write(&path, "seed = 7\n[problem]\nkind = \"lasso\"\nm = 30\nn = 60\ns = 4\nsparsity = 2\n").unwrap();
    let err = RunConfig::load(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2.., .. }), "{err:?}");
    assert!(err.to_string().contains("sparsity"), "{err}");
}
