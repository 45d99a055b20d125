from setuptools import setup, find_packages

setup(
    name="cogplay",
    version="1.0.0",
    description="cogplay - gameplay telemetry logs, synthetic players and cognitive endpoint analysis",
    long_description=open("README.md").read() if __name__ == "__main__" else "",
    long_description_content_type="text/markdown",
    license="AGPL-3.0",
    packages=find_packages(exclude=["tests", "tests.*", "scripts"]),
    package_data={"cogplay": ["templates/report/*.j2"]},
    python_requires=">=3.10",
    install_requires=[
        "pydantic>=2.5.0",
        "pydantic-settings>=2.1.0",
        "python-dotenv>=1.0.0",
        "jinja2>=3.1.2",
        "numpy>=1.24",
        "scipy>=1.11",
        "scikit-learn>=1.3",
        "pandas>=2.0",
    ],
    extras_require={
        "test": ["pytest>=7.4.3", "pingouin>=0.5.3"],
    },
    entry_points={
        "console_scripts": [
            "cogplay=cogplay.main:run",
        ],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU Affero General Public License v3",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Information Analysis",
    ],
    keywords="telemetry psychometrics reaction-time gaze trajectory-clustering",
)
