"""Random tensor algebra: partition norms, semi-products, merging and trimming."""
from .checks import (BoundCheck, SampleReport, check_bilinear, check_multilinear, contract_stat,
                     gaussian_contract, large_dev_stat, ordered_bound, refining_norm)
from .plant import Leaf, SkeletonPlant, merge_simple, second_max, trim_order, trim_simple
from .tensor import (Axis, LabeledTensor, axes_box, contract_many, empty_pair_norm, equality_mask,
                     has_no_pairing, op_norm, pairing_mask, semi_product, without_pairings)
