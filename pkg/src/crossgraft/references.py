"""Full-scale reference results for the benchmark tasks.

Measured at full dataset scale with tens of thousands of training steps;
the harness reports deltas against these in full-scale mode only and never
asserts them at reduced scale.
"""

FULL_SCALE_REFERENCE = {
    ("mnist", "mnist_m"): {
        "source_only": 0.561, "target_only": 0.983,
        "datl_st": 0.890, "datl_ts": 0.983,
        "wo_content_st": 0.821, "wo_content_ts": 0.923,
        "wo_gan_st": 0.726, "wo_gan_ts": 0.703,
        "l2": (0.235, 0.075, 0.016),
        "semi_per_class": {1000: 0.988, 2000: 0.990},
    },
    ("mnist_m", "mnist"): {
        "source_only": 0.633, "target_only": 0.985,
        "datl_st": 0.983, "datl_ts": 0.871,
        "wo_content_st": 0.935, "wo_gan_st": 0.823,
    },
    ("mnist", "usps"): {
        "source_only": 0.634, "target_only": 0.980,
        "datl_st": 0.961, "datl_ts": 0.943,
        "wo_content_st": 0.946, "wo_gan_st": 0.673,
        "l2": (0.258, 0.085, 0.034),
        "semi_per_class": {1000: 0.966, 2000: 0.970},
    },
    ("usps", "mnist"): {
        "source_only": 0.625, "target_only": 0.985,
        "datl_st": 0.956, "datl_ts": 0.953,
        "wo_content_st": 0.938, "wo_gan_st": 0.679,
    },
    ("mnist", "m_digits"): {
        "source_only": 0.603, "target_only": 0.982,
        "datl_st": 0.916, "datl_ts": 0.883,
        "semi_per_class": {1000: 0.925, 2000: 0.932},
    },
    ("m_digits", "mnist"): {
        "source_only": 0.651, "target_only": 0.985,
        "datl_st": 0.923, "datl_ts": 0.892,
    },
    ("fashion", "fashion_m"): {
        "source_only": 0.527, "target_only": 0.920,
        "datl_st": 0.853, "datl_ts": 0.886,
        "semi_per_class": {1000: 0.865, 2000: 0.892},
    },
    ("fashion_m", "fashion"): {
        "source_only": 0.612, "target_only": 0.942,
        "datl_st": 0.917, "datl_ts": 0.903,
    },
}

# Cross-task migration references, st channel (ts in parentheses in the
# source tables): home task -> migrated task accuracy.
MIGRATION_REFERENCE = {
    (("mnist", "mnist_m"), ("mnist", "mnist_m")): 0.890,
    (("mnist", "mnist_m"), ("mnist", "usps")): 0.958,
    (("mnist", "mnist_m"), ("mnist", "m_digits")): 0.915,
    (("mnist", "mnist_m"), ("fashion", "fashion_m")): 0.762,
    (("mnist", "usps"), ("mnist", "mnist_m")): 0.915,
    (("mnist", "usps"), ("mnist", "usps")): 0.961,
    (("mnist", "usps"), ("mnist", "m_digits")): 0.882,
    (("mnist", "usps"), ("fashion", "fashion_m")): 0.605,
    (("mnist", "m_digits"), ("mnist", "mnist_m")): 0.843,
    (("mnist", "m_digits"), ("mnist", "usps")): 0.944,
    (("mnist", "m_digits"), ("mnist", "m_digits")): 0.916,
    (("mnist", "m_digits"), ("fashion", "fashion_m")): 0.613,
    (("fashion", "fashion_m"), ("mnist", "mnist_m")): 0.925,
    (("fashion", "fashion_m"), ("mnist", "usps")): 0.932,
    (("fashion", "fashion_m"), ("mnist", "m_digits")): 0.825,
    (("fashion", "fashion_m"), ("fashion", "fashion_m")): 0.853,
}
