//! Distil a teacher that lives behind the line-delimited JSON protocol. Here
//! the server runs in a thread on a local TCP port; a real deployment would
//! point `ExternalTeacher::spawn` or `connect` at a model-serving process.

use std::io::BufReader;
use std::net::TcpListener;
use std::thread;

use gam_distill::distill::{distill, DistillConfig};
use gam_distill::learners::protocol::serve;
use gam_distill::learners::{ExternalConfig, ExternalTeacher, LearnerSpec};
use gam_distill::synthetic::gen_fourier_sparse;

fn main() -> gam_distill::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr").to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().expect("accept");
        let reader = BufReader::new(stream.try_clone().expect("clone"));
        serve(reader, stream, LearnerSpec::from_name("gbt").unwrap(), None).ok();
    });

    let task = gen_fourier_sparse(8, 3, 0.1, 400, 100, 5)?;
    println!("generating interactions {:?}", task.interactions().iter().map(|s| s.indices()).collect::<Vec<_>>());
    let mut teacher = ExternalTeacher::connect(&addr, ExternalConfig::default())?;
    teacher.fit(&task.train)?;
    let out = distill(&task.train, &teacher, &DistillConfig { n_int: 3, n_explain: Some(40), ..Default::default() })?;
    println!("distilled {:?}", out.ranking.subsets().iter().map(|s| s.indices()).collect::<Vec<_>>());
    Ok(())
}
