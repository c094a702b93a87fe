"""Mesh runtime: topology documents, governance validation, wire protocol,
component hosting."""

from mmw.runtime.topology import (
    AclRule,
    ComponentDescriptor,
    Endpoint,
    Finding,
    GovernancePolicy,
    MeshTopology,
    check_access,
    load_topology,
    load_topology_file,
    validate_topology,
)
from mmw.runtime.mesh import Mesh

__all__ = [
    "AclRule",
    "ComponentDescriptor",
    "Endpoint",
    "Finding",
    "GovernancePolicy",
    "Mesh",
    "MeshTopology",
    "check_access",
    "load_topology",
    "load_topology_file",
    "validate_topology",
]
