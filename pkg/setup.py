from setuptools import setup, find_packages


setup(
    author="sckit developers",
    description="Data-efficient 3D scene understanding toolkit: contrastive pre-training with spatial contexts, "
                "active point labeling, instance clustering and limited-annotation benchmarking",
    entry_points={
        "console_scripts": [
            "sck = sckit.command_line:main_sck",
            "sck-mine-pairs = sckit.command_line:main_mine_pairs",
            "sck-partition = sckit.command_line:main_partition",
            "sck-pretrain-toy = sckit.command_line:main_pretrain_toy",
            "sck-select-points = sckit.command_line:main_select_points",
            "sck-cluster-instances = sckit.command_line:main_cluster_instances",
            "sck-evaluate = sckit.command_line:main_evaluate",
            "sck-sweep = sckit.command_line:main_sweep",
            "sck-synth-scenes = sckit.command_line:main_synth_scenes",
        ],
    },
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.7",
        "plyfile>=0.7",
        "plac>=1.3.3",
        "thinc>=8.0.0,<9.0.0",
        "srsly>=2.4.0,<3.0.0",
    ],
    setup_requires=["pytest-runner"],
    tests_require=["pytest", "pytest-cov", "pytest-mock"],
    license="MIT",
    name="sckit",
    packages=find_packages(include=["sckit"]),
    version='0.1.0',
)
