from setuptools import setup, find_namespace_packages

setup(
    name='alephvault-hsacc',
    version='0.1.0',
    packages=find_namespace_packages(include=['alephvault.*']),
    url='https://github.com/AlephVault/hsacc',
    license='MIT',
    author='luismasuelli',
    author_email='luismasuelli@hotmail.com',
    description='Incomplete multi-view clustering by hierarchical semantic alignment and cooperative completion',
    install_requires=[
        'Cerberus==1.3.4',
        'click==8.1.7',
        'matplotlib==3.8.4',
        'numpy==1.26.4',
        'pandas==2.2.2',
        'scikit-learn==1.4.2',
        'scipy==1.13.0',
        'torch==2.3.0'
    ],
    extras_require={
        'test': [
            'pytest==8.2.0'
        ]
    },
    entry_points={
        'console_scripts': [
            'hsacc = alephvault.hsacc.cli:main'
        ]
    }
)
