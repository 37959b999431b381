from setuptools import setup, find_packages

version = ""
with open("mmforesight/__init__.py") as input_file:
    for line in input_file.readlines():
        if line.startswith("__version__"):
            version = line.split("=", 1)[1].strip().strip('"')
            break

requirements = []
with open("requirements.txt") as input_file:
    for line in input_file.readlines():
        if line.strip():
            requirements.append(line.strip())

with open("README.md", errors='ignore') as input_file:
    readme = input_file.read()

setup(
    name='mmforesight',
    author='mmforesight developers',
    version=version,
    packages=find_packages(include=['mmforesight', 'mmforesight.*']),
    license='MIT',
    description='Multisensory next-frame prediction for robot interaction trials',
    long_description=readme,
    include_package_data=True,
    long_description_content_type='text/markdown',
    install_requires=requirements,
    extras_require={
        'test': ['pytest>=7', 'hypothesis>=6'],
    },
    entry_points={
        'console_scripts': ['mmforesight=mmforesight.cli:main'],
    },
    python_requires='>=3.8.0',
)
