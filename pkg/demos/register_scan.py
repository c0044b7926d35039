"""Align a noisy, displaced copy of a point cloud with ICP and report the residual."""
import numpy as np
from scipy.spatial.transform import Rotation

from rfray.registration import PointCloud, RigidTransform, cloud_distance_stats, icp

rng = np.random.default_rng(0)
room = rng.uniform(0, 1, (2000, 3)) * [15.0, 3.5, 3.3]
truth = RigidTransform(Rotation.from_euler("z", 6, degrees=True).as_matrix(), [0.3, -0.1, 0.05])
scan = truth.apply(room) + rng.normal(0, 0.01, room.shape)

rep = icp(PointCloud(room, "model"), PointCloud(scan, "scan"), max_iters=100, trim=0.1)
aligned = PointCloud(rep.transform.apply(room))
mean, std = cloud_distance_stats(aligned, PointCloud(scan))
err = truth.inverse().compose(rep.transform)
print(f"iterations {rep.iterations}, converged {rep.converged}, rms {rep.rms_m * 100:.2f} cm")
print(f"rotation error {np.degrees(err.rotation_angle()):.4f} deg, translation error "
      f"{np.linalg.norm(err.translation) * 1000:.2f} mm")
print(f"cloud-to-cloud distance {mean * 100:.2f} +/- {std * 100:.2f} cm")
