"""Write a disjoint 3000/2000 class-balanced split of the 5000 MNIST images
bundled with mlxtend as standard IDX files.

    python scripts/prepare_mnist5k.py [--out data/mnist5k] [--train 3000] [--test 2000]

Use this when the full MNIST IDX files are not at hand; point
``data.path`` at the output directory.
"""

import argparse
import os

from bnn_align.data import Dataset, split_pool, write_mnist_dir


def mnist5k_pool() -> Dataset:
    from mlxtend.data import mnist_data

    x, y = mnist_data()
    return Dataset(x, y, "classification", 10)


def prepare(out, n_train=3000, n_test=2000, seed=0):
    train, test = split_pool(mnist5k_pool(), n_train, n_test, seed=seed)
    write_mnist_dir(train, test, out)
    return out


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist5k"))
    p.add_argument("--train", type=int, default=3000)
    p.add_argument("--test", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    print(prepare(os.path.normpath(a.out), a.train, a.test, a.seed))
