use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SynthError;
use crate::geometry::{RigidTransform, SymMat3, Vec3};
use crate::math::wrap_angle;
use crate::penalties::{GnssFix, GnssStatus, ImuAttitude};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorNoise {
    /// Meters squared.
    pub gnss_cov_open: SymMat3,
    pub gnss_cov_canopy: SymMat3,
    /// Added to the true heading by the magnetometer, radians.
    pub mag_heading_bias: f64,
    /// Standard deviation of roll, pitch and heading noise, radians.
    pub attitude_noise_sigma: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            gnss_cov_open: SymMat3::diag(0.02 * 0.02, 0.02 * 0.02, 0.04 * 0.04),
            gnss_cov_canopy: SymMat3::diag(0.1 * 0.1, 0.1 * 0.1, 0.3 * 0.3),
            mag_heading_bias: 17f64.to_radians(),
            attitude_noise_sigma: 0.2f64.to_radians(),
        }
    }
}

impl SensorNoise {
    pub fn noiseless() -> Self {
        SensorNoise {
            gnss_cov_open: SymMat3::ZERO,
            gnss_cov_canopy: SymMat3::ZERO,
            mag_heading_bias: 0.0,
            attitude_noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let psd = |c: &SymMat3| c.is_finite() && c.eigen().is_ok_and(|e| e.values[0] >= 0.0);
        if !psd(&self.gnss_cov_open) || !psd(&self.gnss_cov_canopy) {
            return Err(SynthError::InvalidParameter("GNSS covariances must be positive semi-definite"));
        }
        if !(self.attitude_noise_sigma >= 0.0) || !self.mag_heading_bias.is_finite() {
            return Err(SynthError::InvalidParameter("attitude noise must be non-negative"));
        }
        Ok(())
    }
}

/// Mixes a run seed with a stream tag and sample index into an independent
/// generator seed (SplitMix64 finalizer).
pub fn sub_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

/// A GNSS fix of the pose's origin with Gaussian error. The reported
/// covariance is the sampling covariance. Canopy fixes report `RtkFloat`.
pub fn gen_gnss(
    true_pose: &RigidTransform,
    time: f64,
    noise: &SensorNoise,
    under_canopy: bool,
    seed: u64,
) -> Result<GnssFix, SynthError> {
    let covariance = if under_canopy { noise.gnss_cov_canopy } else { noise.gnss_cov_open };
    let root = covariance
        .sqrt_psd()
        .map_err(|_| SynthError::InvalidParameter("GNSS covariance must be finite"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = normal3(&mut rng);
    Ok(GnssFix {
        time,
        position: true_pose.translation() + root * z,
        covariance,
        status: if under_canopy { GnssStatus::RtkFloat } else { GnssStatus::RtkFixed },
    })
}

/// An IMU attitude: roll and pitch with zero-mean noise, heading offset by
/// the magnetometer bias plus noise.
pub fn gen_imu(true_pose: &RigidTransform, time: f64, noise: &SensorNoise, seed: u64) -> ImuAttitude {
    let (roll, pitch, yaw) = true_pose.rotation().to_euler_zyx();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = normal3(&mut rng) * noise.attitude_noise_sigma;
    let sigma2 = noise.attitude_noise_sigma * noise.attitude_noise_sigma;
    ImuAttitude::from_euler(
        time,
        roll + n.x,
        pitch + n.y,
        wrap_angle(yaw + noise.mag_heading_bias + n.z),
        sigma2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;

    #[test]
    fn zero_covariance_is_exact() {
        let pose = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let fix = gen_gnss(&pose, 0.5, &SensorNoise::noiseless(), false, 7).unwrap();
        assert_eq!(fix.position, pose.translation());
        assert_eq!(fix.time, 0.5);
    }

    #[test]
    fn reported_covariance_is_configured() {
        let noise = SensorNoise::default();
        let fix = gen_gnss(&RigidTransform::IDENTITY, 0.0, &noise, true, 3).unwrap();
        assert_eq!(fix.covariance, noise.gnss_cov_canopy);
        assert_eq!(fix.status, GnssStatus::RtkFloat);
    }

    #[test]
    fn canopy_vertical_spread_is_three_times_horizontal() {
        let noise = SensorNoise {
            gnss_cov_canopy: SymMat3::diag(0.01, 0.01, 0.09),
            ..SensorNoise::default()
        };
        let (mut sx, mut sz) = (0.0, 0.0);
        let n = 20_000;
        for i in 0..n {
            let f = gen_gnss(&RigidTransform::IDENTITY, 0.0, &noise, true, sub_seed(11, 0, i)).unwrap();
            sx += f.position.x * f.position.x;
            sz += f.position.z * f.position.z;
        }
        let ratio = sqrt(sz / sx);
        assert!((ratio - 3.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn zero_noise_imu_is_exact() {
        let pose = RigidTransform::from_rotation(crate::Mat3::from_euler_zyx(0.1, -0.2, 0.3)).unwrap();
        let att = gen_imu(&pose, 0.0, &SensorNoise::noiseless(), 1);
        assert!(att.attitude.max_abs_diff(&pose.rotation()) < 1e-15);
        assert!((att.raw_magnetic_heading - 0.3).abs() < 1e-15);
    }

    #[test]
    fn heading_bias_and_unbiased_tilt() {
        let noise = SensorNoise::default();
        let pose = RigidTransform::from_rotation(crate::Mat3::from_euler_zyx(0.05, 0.02, 1.0)).unwrap();
        let n = 10_000;
        let (mut roll, mut pitch, mut head) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let a = gen_imu(&pose, 0.0, &noise, sub_seed(5, 1, i));
            let (r, p) = a.roll_pitch();
            roll += r - 0.05;
            pitch += p - 0.02;
            head += wrap_angle(a.raw_magnetic_heading - 1.0);
        }
        let n = n as f64;
        assert!((roll / n).abs() < 0.1f64.to_radians());
        assert!((pitch / n).abs() < 0.1f64.to_radians());
        assert!((head / n - 17f64.to_radians()).abs() < 0.1f64.to_radians());
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(1, 0, 0), sub_seed(1, 0, 1));
        assert_ne!(sub_seed(1, 0, 0), sub_seed(1, 1, 0));
        assert_eq!(sub_seed(1, 2, 3), sub_seed(1, 2, 3));
    }
}
