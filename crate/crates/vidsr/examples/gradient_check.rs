//! Runs finite-difference checks over every differentiable operation and
//! prints the worst relative error of each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidsr::conv::{conv_forward, ConvWeights, Padding};
use vidsr::gradcheck::gradient_check;
use vidsr::loss::{huber_smoothness, mse_loss};
use vidsr::shuffle::pixel_shuffle;
use vidsr::tensor::{activation, Activation, TensorData};
use vidsr::warp::bilinear_warp;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> TensorData<f64> {
    TensorData::from_fn(shape, |_| (rng.random::<f64>() - 0.5) * 2.0 * scale)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let tol = 1e-4;

    let input = randn(&mut rng, &[1, 2, 6, 6], 1.0);
    let w = randn(&mut rng, &[2, 2, 3, 3, 3], 0.5);
    let b = randn(&mut rng, &[3], 0.1);
    let report = gradient_check(
        |l| {
            let cw = ConvWeights::new(l[1].clone(), l[2].clone())?;
            let y = conv_forward(&l[0], &cw, 1, Padding::Same)?;
            mse_loss(&activation(&y, Activation::Relu), &l[3])
        },
        &[
            randn(&mut rng, &[2, 2, 6, 6], 1.0),
            w,
            b,
            randn(&mut rng, &[1, 3, 6, 6], 1.0),
        ],
        tol,
    )
    .unwrap();
    println!("conv -> relu -> mse      {report}");
    drop(input);

    let report = gradient_check(
        |l| {
            let y = pixel_shuffle(&l[0], 2)?;
            mse_loss(&y, &l[1])
        },
        &[
            randn(&mut rng, &[1, 4, 3, 3], 1.0),
            randn(&mut rng, &[1, 1, 6, 6], 1.0),
        ],
        tol,
    )
    .unwrap();
    println!("pixel shuffle            {report}");

    // Flow offsets stay clear of integer sample positions where the
    // bilinear kernel is non-smooth.
    let mut flow = TensorData::zeros(&[2, 6, 6]);
    for v in flow.data_mut().iter_mut() {
        let m = 0.15 + 0.2 * rng.random::<f64>();
        *v = if rng.random::<bool>() { m } else { -m };
    }
    let report = gradient_check(
        |l| {
            let y = bilinear_warp(&l[0], &l[1])?;
            mse_loss(&y, &l[2])
        },
        &[
            randn(&mut rng, &[1, 1, 6, 6], 1.0),
            flow,
            randn(&mut rng, &[1, 1, 6, 6], 1.0),
        ],
        tol,
    )
    .unwrap();
    println!("bilinear warp            {report}");

    let report = gradient_check(
        |l| huber_smoothness(&l[0], 0.01),
        &[randn(&mut rng, &[2, 5, 5], 0.3)],
        tol,
    )
    .unwrap();
    println!("huber smoothness         {report}");

    let report = gradient_check(
        |l| mse_loss(&activation(&l[0], Activation::Tanh), &l[1]),
        &[randn(&mut rng, &[8], 1.0), randn(&mut rng, &[8], 1.0)],
        tol,
    )
    .unwrap();
    println!("tanh -> mse              {report}");
}
