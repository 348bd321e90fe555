use css_core::room::{image_method_rir, ArrayGeometry, RoomSpec};

fn fit(h: &[f64], fs: f64, a: f64, b: f64) -> f64 {
    let mut edc: Vec<f64> = h.iter().rev().scan(0.0, |acc, &v| { *acc += v*v; Some(*acc) }).collect();
    edc.reverse();
    let total = edc[0];
    let db: Vec<f64> = edc.iter().map(|e| 10.0*(e/total).max(1e-30).log10()).collect();
    let pts: Vec<(f64,f64)> = db.iter().enumerate().filter(|(_,&d)| d<=a && d>=b).map(|(i,&d)| (i as f64/fs, d)).collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0*p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0*p.1).sum();
    let slope = (n*sxy - sx*sy)/(n*sxx - sx*sx);
    -60.0/slope
}

fn main() {
    let rooms: [[f64;3];4] = [[4.0,3.2,2.6],[5.0,4.0,3.0],[6.0,5.0,3.5],[7.0,6.0,3.0]];
    for t60 in [0.15f64, 0.3, 0.6] {
        for dims in rooms {
            let room = RoomSpec::new(dims, t60).unwrap();
            let mic = [dims[0]*0.3, dims[1]*0.42, 1.3];
            let src = [dims[0]*0.7, dims[1]*0.6, 1.6];
            let geom = ArrayGeometry::new(vec![mic]).unwrap();
            let rir = image_method_rir(&room, src, &geom, None, 16_000).unwrap();
            let h = rir.taps().row(0).to_vec();
            print!("t60={t60} room={dims:?}:");
            for (a,b) in [(-5.0,-25.0),(-10.0,-30.0),(-15.0,-35.0)] {
                print!("  [{a},{b}]={:.3}", fit(&h, 16000.0, a, b));
            }
            println!();
        }
    }
}
