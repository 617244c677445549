from transitions import Machine, State


class ExperimentFSM(Machine):
    def __init__(self, model) -> None:
        """Constructor of the base `ExperimentFSM` class."""
        idle = State(
            name="idle",
            on_enter=["current_state"],
        )
        general_error = State(
            name="general_error",
            on_enter=["current_state", "raise_error"],
        )
        instance_setup = State(
            name="instance_setup",
            on_enter=["current_state", "setup_instance"],
        )
        reference_energies = State(
            name="reference_energies",
            on_enter=["current_state", "compute_reference"],
        )
        # Worker pool over the experiment indices
        experiments = State(
            name="experiments",
            on_enter=["current_state", "run_experiments"],
        )
        aggregation = State(
            name="aggregation",
            on_enter=["current_state", "aggregate"],
        )
        persistence = State(
            name="persistence",
            on_enter=["current_state", "persist"],
        )
        finished = State(
            name="finished",
            on_enter=["current_state", "success_message"],
        )

        states = [
            idle,
            general_error,
            instance_setup,
            reference_energies,
            experiments,
            aggregation,
            persistence,
            finished,
        ]

        transitions = [
            {"trigger": "finished_to_idle", "source": "finished", "dest": "idle"},
            {
                "trigger": "idle_to_instance_setup",
                "source": "idle",
                "dest": "instance_setup",
            },
            {
                "trigger": "instance_setup_to_general_error",
                "source": "instance_setup",
                "dest": "general_error",
                "conditions": ["in_error"],
            },
            {
                "trigger": "instance_setup_to_reference_energies",
                "source": "instance_setup",
                "dest": "reference_energies",
                "unless": ["in_error"],
            },
            {
                "trigger": "reference_energies_to_general_error",
                "source": "reference_energies",
                "dest": "general_error",
                "conditions": ["in_error"],
            },
            {
                "trigger": "reference_energies_to_experiments",
                "source": "reference_energies",
                "dest": "experiments",
                "unless": ["in_error"],
            },
            {
                "trigger": "experiments_to_general_error",
                "source": "experiments",
                "dest": "general_error",
                "conditions": ["in_error"],
            },
            {
                "trigger": "experiments_to_aggregation",
                "source": "experiments",
                "dest": "aggregation",
                "unless": ["in_error"],
            },
            {
                "trigger": "aggregation_to_general_error",
                "source": "aggregation",
                "dest": "general_error",
                "conditions": ["in_error"],
            },
            {
                "trigger": "aggregation_to_persistence",
                "source": "aggregation",
                "dest": "persistence",
                "unless": ["in_error"],
            },
            {
                "trigger": "persistence_to_general_error",
                "source": "persistence",
                "dest": "general_error",
                "conditions": ["in_error"],
            },
            {
                "trigger": "persistence_to_finished",
                "source": "persistence",
                "dest": "finished",
                "unless": ["in_error"],
            },
        ]
        super().__init__(
            model=model,
            states=states,
            transitions=transitions,
            initial=idle,
        )

    def __getattr__(self, item):
        """Method to get unlisted attributes of the class. If the attribute
        is not found, the method will return the model attribute.

        Args:
            item: The attribute that should be retrieved.

        Returns:
            The model attribute.
        """
        return self.model.__getattribute__(item)

    def next_state(self) -> None:
        """Method for automatic execution of available transitions in each
        of the machine states.
        """
        available_transitions = self.get_triggers(self.state)
        available_transitions = available_transitions[len(self.states) :]
        for curr_transition in available_transitions:
            may_method_result = self.may_trigger(curr_transition)
            if may_method_result:
                self.trigger(curr_transition)
