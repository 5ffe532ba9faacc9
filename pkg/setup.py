import os
from setuptools import setup, find_packages

module_name = "kirlab"

file_dir = os.path.dirname(os.path.realpath(__file__))
absdir = lambda p: os.path.join(file_dir, p)

############### versioning ###############
verfile = absdir(os.path.join(module_name, "version.py"))
version = {"__file__": verfile}

with open(verfile, "r") as fp:
    exec(fp.read(), version)

############### setup ###############

build_version = "KIRLAB_BUILD" in os.environ

setup(
    name=module_name,
    version=version["get_version"](build_version),
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.8",
    install_requires=["numpy >= 1.21.2",
                      "scipy >= 1.7.3",
                      "pandas >= 1.3.4",
                      "torch >= 1.10.0",
                      "xitorch >= 0.3.0",
                      "tensorboard >= 2.7.0",
                      "tomli >= 1.2.2"],
    extras_require={"test": ["pytest >= 6.2"]},
    entry_points={"console_scripts": ["kirlab = kirlab.cli:main"]},
    license='',
    description='numerical lab for the Kirchhoff Dirichlet problem: ground states, branch equation, '
                'homotopy continuation and a-priori bound sweeps'
)
