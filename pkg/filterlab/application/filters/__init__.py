"""The filters: Kalman and grid (exact), bootstrap particle filter, ensemble Kalman filter."""
